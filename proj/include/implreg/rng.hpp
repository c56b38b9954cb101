#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace implreg {

/// SplitMix64 finalizer. Used to expand seeds and derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mix a base seed with a stream tag and an index into a new 64-bit seed.
/// Distinct (tag, index) pairs give statistically independent xoshiro streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);

/// xoshiro256** with SplitMix64 seeding. The output sequence and the
/// derived uniform/normal draws are fixed across platforms and compilers,
/// which the standard <random> distributions don't guarantee.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller; caches the second variate.
    double normal();
    /// +1 or -1 with equal probability.
    int sign();

private:
    std::array<std::uint64_t, 4> s_{};
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace implreg
