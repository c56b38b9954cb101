#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "implreg/data.hpp"
#include "implreg/losses.hpp"

namespace implreg {

class PopulationOracle;

enum class FunctionClassKind {
    Scalar,             ///< {x -> <x, v> : |v| <= R}
    GradientComposite,  ///< {(x, y) -> l'(y, <x, v>) x : |v| <= R}
};

struct FunctionClassSpec {
    double radius = 1.0;
    FunctionClassKind kind = FunctionClassKind::Scalar;
    std::optional<LossModel> loss;  ///< required for GradientComposite

    void validate() const;
};

/// How the expectation over Rademacher signs is taken.
struct SignMethod {
    enum class Kind { MonteCarlo, Exhaustive };
    Kind kind = Kind::MonteCarlo;
    long draws = 2000;  ///< K, Monte Carlo only
    std::uint64_t seed = 0;

    static SignMethod monte_carlo(long draws, std::uint64_t seed) {
        return {Kind::MonteCarlo, draws, seed};
    }
    static SignMethod exhaustive() { return {Kind::Exhaustive, 0, 0}; }
};

/// Largest n accepted by SignMethod::Exhaustive.
inline constexpr std::size_t kMaxExhaustiveSamples = 20;

struct RademacherEstimate {
    double value = 0.0;
    double std_error = 0.0;  ///< zero iff exhaustive
    SignMethod method;
};

/// First and second derivative of a loss in its second argument. Lets the
/// gradient-class estimator run on losses outside LossKind, e.g. the linear
/// loss l(y, a) = L a whose gradient class collapses to fixed vectors.
struct LossDerivatives {
    std::function<double(double, double)> first;
    std::function<double(double, double)> second;
};

LossDerivatives derivatives_of(const LossModel& loss);

/// Probe set used to approximate the per-draw supremum over the ball.
struct ProbeOptions {
    int directions = 512;    ///< random points on the R-sphere
    int ascents = 64;        ///< projected ascents started from the best directions
    int ascent_steps = 30;
    std::uint64_t seed = 0x5eed;
};

/// Empirical Rademacher complexity of the scalar class. Per draw the supremum
/// is (R/n) |sum_j eps_j x_j| exactly.
RademacherEstimate rademacher_scalar(const Dataset& data, double radius, const SignMethod& method);

/// Empirical Rademacher complexity of the gradient class. The supremum over
/// the ball is approximated from below by a fixed probe set, so the value is
/// the same deterministic function of the sign vector for both methods.
RademacherEstimate rademacher_gradient(const LossModel& loss, const Dataset& data, double radius,
                                       const SignMethod& method, const ProbeOptions& probes = {});
RademacherEstimate rademacher_gradient(const LossDerivatives& loss, const Dataset& data,
                                       double radius, const SignMethod& method,
                                       const ProbeOptions& probes = {});

/// Per-draw supremum estimate for one sign vector; exposed for testing.
double gradient_class_supremum(const LossDerivatives& loss, const Dataset& data, double radius,
                               const std::vector<int>& signs, const ProbeOptions& probes = {});

struct RademacherBounds {
    double scalar = 0.0;    ///< kappa R / sqrt(n)
    double gradient = 0.0;  ///< 2 sqrt(2) (kappa L + kappa^2 M R) / sqrt(n)
};

RademacherBounds rademacher_bounds(double kappa, double lipschitz, double smoothness, double radius,
                                std::size_t n);

struct ConcentrationBound {
    double raw = 0.0;         ///< 4 R_n(G_R) + G_R sqrt(2 log/n) + G_R 4 log/n
    double simplified = 0.0;  ///< 20 kappa^2 R (L + M) sqrt(log/n)
    double sup_bound = 0.0;   ///< G_R = kappa L
    bool valid = false;       ///< sqrt(n) >= sqrt(log(4/delta))
};

ConcentrationBound concentration_bound(double kappa, double lipschitz, double smoothness,
                                       double radius, std::size_t n, double delta);
/// Same with log(4/delta) given directly.
ConcentrationBound concentration_bound_log(double kappa, double lipschitz, double smoothness,
                                           double radius, std::size_t n, double log_term);

/// Points at which the gradient noise is probed.
struct ProbeSet {
    int ball_points = 256;    ///< uniform in the R-ball
    int sphere_points = 256;  ///< uniform on the R-sphere
    std::vector<Vector> extra;  ///< e.g. path iterates; those outside the ball are skipped
    std::uint64_t seed = 0xba11;
};

/// max over the probe set of |grad L_hat(v) - grad L(v)|, a lower estimate of
/// the supremum over the R-ball.
double empirical_sup_noise(const LossModel& loss, const Dataset& data,
                           const PopulationOracle& oracle, double radius, const ProbeSet& probes);

}  // namespace implreg
