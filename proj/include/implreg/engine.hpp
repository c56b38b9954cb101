#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "implreg/data.hpp"
#include "implreg/losses.hpp"

namespace implreg {

/// Constant step size gradient descent settings. v0 defaults to the origin.
struct DescentConfig {
    double gamma = 1.0;
    int T = 1;
    std::optional<Vector> v0;

    void validate(std::size_t dimension) const;
    Vector start(std::size_t dimension) const;
};

/// Iterates v_0..v_T with the empirical gradients used to produce them.
/// iterates.size() == T + 1, empirical_gradients.size() == T,
/// empirical_risks[t] is the empirical risk at v_t.
struct DescentPath {
    double gamma = 0.0;
    std::vector<Vector> iterates;
    std::vector<Vector> empirical_gradients;
    std::vector<double> empirical_risks;

    int T() const { return static_cast<int>(empirical_gradients.size()); }
};

/// Raised when an iterate stops being finite or leaves the divergence ball.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int iteration, double norm);
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

/// Iterates with norm above this are treated as divergent.
inline constexpr double kDivergenceNorm = 1e12;

/// (1/n) sum_j l(y_j, <x_j, w>)
double empirical_risk(const LossModel& loss, const Dataset& data, const Vector& w);
/// (1/n) sum_j l'(y_j, <x_j, w>) x_j
Vector empirical_gradient(const LossModel& loss, const Dataset& data, const Vector& w);

/// Batch gradient descent v_{t+1} = v_t - gamma * grad(v_t), full path kept.
/// No projection or clipping is applied.
DescentPath run(const LossModel& loss, const Dataset& data, const DescentConfig& cfg);

/// Running average, last iterate and per-step scalars of a streamed run.
struct StreamSummary {
    Vector average;                     ///< mean of v_1..v_T
    Vector last;                        ///< v_T
    std::vector<double> norms;          ///< |v_t|, t = 0..T
    std::vector<double> empirical_risks;  ///< empirical risk at v_t, t = 0..T
};

/// Called once per t = 1..T with the iterate v_t and the running average of v_1..v_t.
using StepObserver = std::function<void(int t, const Vector& iterate, const Vector& average)>;

/// Same iteration as run() without storing the path.
StreamSummary run_streaming(const LossModel& loss, const Dataset& data, const DescentConfig& cfg,
                            const StepObserver& observer = {});

/// (1/T) sum_{t=1}^T v_t; v_0 is excluded.
Vector averaged_iterate(const DescentPath& path);
Vector last_iterate(const DescentPath& path);

/// CSV with columns t,norm,dist_to_w_star,empirical_risk. The distance column
/// is left empty when w_star is not given.
void write_path_csv(const std::filesystem::path& file, const DescentPath& path,
                    const std::optional<Vector>& w_star);

}  // namespace implreg
