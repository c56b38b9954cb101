#pragma once

#include <optional>
#include <span>
#include <vector>

#include "implreg/concentration.hpp"
#include "implreg/data.hpp"
#include "implreg/engine.hpp"
#include "implreg/losses.hpp"
#include "implreg/oracle.hpp"

namespace implreg {

/// Both sides of the last-iterate identity
///   q_T = (1/T) sum_t q_t + sum_{t=1}^{T-1} 1/(t(t+1)) sum_{s=T-t+1}^T (q_s - q_{T-t}).
struct IdentitySides {
    double lhs = 0.0;
    double rhs = 0.0;
};

IdentitySides last_iterate_identity(std::span<const double> q);

/// Weights 1/(t(t+1)) for t = 1..T-1.
std::vector<double> last_iterate_weights(int T);

/// Step-size preconditions gamma <= 1/(kappa^2 M) and gamma <= 1.
struct StepPreconditions {
    double gamma_limit = 0.0;  ///< 1/(kappa^2 M)
    bool smooth_ok = false;
    bool unit_ok = false;
};

StepPreconditions step_preconditions(const LossModel& loss, const Dataset& data, double gamma);

/// Population risk and gradient along a path, t = 0..T.
struct OracleTrace {
    std::vector<double> risks;
    std::vector<double> risk_std_errors;
    std::vector<Vector> gradients;
    std::vector<double> gradient_std_errors;  ///< norm of the coordinatewise errors
};

OracleTrace trace_oracle(const PopulationOracle& oracle, const DescentPath& path);

/// A residual of an inequality "lhs <= rhs" (residual = lhs - rhs) with the
/// tolerance it is judged against.
struct Residual {
    double value = 0.0;
    double tolerance = 0.0;
    bool precondition_ok = false;
    bool holds() const { return value <= tolerance; }
};

/// Default absolute tolerance for inequalities with an exact oracle.
inline constexpr double kExactTolerance = 1e-8;

/// Risk inequality for one step t in 1..T:
/// [L(v_t) - L(w)] - [(|v_{t-1}-w|^2 - |v_t-w|^2)/(2 gamma) + <grad L(v_{t-1}) - grad L_hat(v_{t-1}), v_t - w>].
Residual check_risk_step(const LossModel& loss, const Dataset& data,
                         const PopulationOracle& oracle, const DescentPath& path, int t,
                         const Vector& w);
/// All t = 1..T at once from a precomputed trace.
std::vector<Residual> risk_step_residuals(const LossModel& loss, const Dataset& data,
                                          const PopulationOracle& oracle, const DescentPath& path,
                                          const OracleTrace& trace, const Vector& w);

/// Path recursion for t in 0..T-1:
/// |v_{t+1}-w*|^2 - [|v_0-w*|^2 + 2 gamma sum_{s<=t} (<e'_s, v_s - w*> + kappa L |e'_s|)],
/// e'_s = grad L(v_s) - grad L_hat(v_s).
Residual check_path_recursion(const LossModel& loss, const Dataset& data,
                              const PopulationOracle& oracle, const DescentPath& path, int t);
std::vector<Residual> path_recursion_residuals(const LossModel& loss, const Dataset& data,
                                               const PopulationOracle& oracle,
                                               const DescentPath& path, const OracleTrace& trace);

struct DecompositionReport {
    double bias_term = 0.0;              ///< |v_0 - w|^2 / (2 gamma T)
    std::vector<double> variance_terms;  ///< t = 1..T
    /// Weighted correction for t = 1..T-1:
    /// 1/(t(t+1)) sum_{s=T-t+1}^T <grad L(v_{s-1}) - grad L_hat(v_{s-1}), v_s - v_{T-t}>.
    std::vector<double> last_iterate_correction;
    double lhs_avg = 0.0;         ///< L(v_bar_T) - L(w)
    double mean_risk_gap = 0.0;   ///< (1/T) sum_t L(v_t) - L(w)
    double lhs_last = 0.0;        ///< L(v_T) - L(w)
    double rhs_avg = 0.0;         ///< bias_term + mean(variance_terms)
    double rhs_last = 0.0;        ///< mean_risk_gap + sum(last_iterate_correction)
    double tolerance = 0.0;
    bool precondition_ok = false;

    bool averaged_holds() const {
        return lhs_avg <= mean_risk_gap + tolerance && mean_risk_gap <= rhs_avg + tolerance;
    }
    bool last_holds() const { return lhs_last <= rhs_last + tolerance; }
};

struct DecomposeOptions {
    double tolerance = kExactTolerance;
    /// Multiplies every gradient-noise inner product. Only for mutation
    /// testing of the checks; 1 is the real decomposition.
    double variance_sign = 1.0;
};

DecompositionReport decompose(const LossModel& loss, const Dataset& data,
                              const PopulationOracle& oracle, const DescentPath& path,
                              const Vector& w, const DecomposeOptions& options = {});

/// max{1, 3 |w*|}
double path_radius(const Vector& w_star);

struct BoundedPathResult {
    bool bounded = true;
    std::optional<int> first_violation;  ///< smallest t in 1..T breaking either inequality
};

/// |v_t| <= R and |v_t - w*| <= 2R/3 for all t = 1..T.
BoundedPathResult check_bounded_path(const DescentPath& path, const Vector& w_star, double radius);
/// Same check on the iterate norms and distances only.
BoundedPathResult check_bounded_path(std::span<const double> norms,
                                     std::span<const double> distances, double radius);

/// sqrt(n) >= max{1, 90 gamma_T kappa^2 (1 + kappa L)(M + L)} sqrt(log(4/delta)).
/// delta may exceed 1 as long as log(4/delta) > 0.
bool sample_size_condition(std::size_t n, double gamma_T, double kappa, double lipschitz,
                           double smoothness, double delta);
bool sample_size_condition_log(std::size_t n, double gamma_T, double kappa, double lipschitz,
                               double smoothness, double log_term);

/// gamma T = sqrt(n) / (90 kappa^2 (1 + kappa L)(M + L) sqrt(log(4/delta)))
double schedule_gamma_T(std::size_t n, double kappa, double lipschitz, double smoothness,
                        double delta);
double schedule_gamma_T_log(std::size_t n, double kappa, double lipschitz, double smoothness,
                            double log_term);

struct ExcessRiskBounds {
    double averaged = 0.0;   ///< |w*|^2/(2 gamma T) + 180 max{1,|w*|^2} kappa^2 (M+L) sqrt(log/n)
    double last = 0.0;       ///< same with 425 log(T)
    /// Forms valid when gamma T equals the schedule:
    /// 225 / 470 log(T) times max{1,|w*|^2} kappa^2 (1 + kappa L)(M + L) sqrt(log/n).
    double averaged_scheduled = 0.0;
    double last_scheduled = 0.0;
};

ExcessRiskBounds excess_risk_bounds(std::size_t n, double gamma, int T, double delta,
                             const Vector& w_star, double kappa, double lipschitz,
                             double smoothness);
/// Formula core with log(T) and log(4/delta) supplied directly.
ExcessRiskBounds excess_risk_bounds_log(std::size_t n, double gamma_T, double log_T, double log_term,
                                 double w_star_norm_sq, double kappa, double lipschitz,
                                 double smoothness);

/// Theoretical quantities next to their measured counterparts for one run.
struct BoundReport {
    double radius = 0.0;
    bool n_condition_ok = false;
    double gamma_T_schedule = 0.0;
    double gamma = 0.0;
    int T = 0;
    ExcessRiskBounds bounds;
    ConcentrationBound concentration;
    struct Measured {
        double excess_avg = 0.0;
        double excess_last = 0.0;
        double sup_noise = 0.0;
        BoundedPathResult path;
    } measured;

    bool averaged_within() const { return measured.excess_avg <= bounds.averaged; }
    bool last_within() const { return measured.excess_last <= bounds.last; }
    bool noise_within() const { return measured.sup_noise <= concentration.simplified; }
};

}  // namespace implreg
