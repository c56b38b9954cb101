#include "implreg/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace implreg {

IdentitySides last_iterate_identity(std::span<const double> q) {
    if (q.empty()) throw std::invalid_argument("identity needs a non-empty sequence");
    const std::size_t T = q.size();
    long double total = 0.0L;
    for (double v : q) total += v;
    // q is 0-based here: q_s (1-based) = q[s - 1].
    long double suffix = 0.0L;
    long double correction = 0.0L;
    for (std::size_t t = 1; t < T; ++t) {
        suffix += q[T - t];  // adds q_{T-t+1}
        const long double inner = suffix - static_cast<long double>(t) * q[T - t - 1];
        correction += inner / (static_cast<long double>(t) * static_cast<long double>(t + 1));
    }
    return {q[T - 1], static_cast<double>(total / static_cast<long double>(T) + correction)};
}

std::vector<double> last_iterate_weights(int T) {
    std::vector<double> weights;
    for (int t = 1; t < T; ++t) weights.push_back(1.0 / (static_cast<double>(t) * (t + 1)));
    return weights;
}

StepPreconditions step_preconditions(const LossModel& loss, const Dataset& data, double gamma) {
    StepPreconditions p;
    p.gamma_limit = 1.0 / (data.kappa * data.kappa * loss.smoothness());
    p.smooth_ok = gamma <= p.gamma_limit;
    p.unit_ok = gamma <= 1.0;
    return p;
}

OracleTrace trace_oracle(const PopulationOracle& oracle, const DescentPath& path) {
    OracleTrace trace;
    for (const auto& v : path.iterates) {
        const auto risk = oracle.risk(v);
        auto grad = oracle.gradient(v);
        trace.risks.push_back(risk.value);
        trace.risk_std_errors.push_back(risk.std_error);
        trace.gradient_std_errors.push_back(grad.norm_std_error());
        trace.gradients.push_back(std::move(grad.value));
    }
    return trace;
}

namespace {

void require_positive_step(const DescentPath& path) {
    if (!(path.gamma > 0.0)) throw std::invalid_argument("inequality checks need gamma > 0");
}

void require_index(const DescentPath& path, int t, int lo, int hi) {
    if (t < lo || t > hi)
        throw std::out_of_range(fmt::format("step index {} outside [{}, {}] (T = {})", t, lo, hi,
                                            path.T()));
}

}  // namespace

std::vector<Residual> risk_step_residuals(const LossModel& loss, const Dataset& data,
                                          const PopulationOracle& oracle, const DescentPath& path,
                                          const OracleTrace& trace, const Vector& w) {
    require_positive_step(path);
    const auto pre = step_preconditions(loss, data, path.gamma);
    const auto at_w = oracle.risk(w);
    std::vector<Residual> out;
    out.reserve(static_cast<std::size_t>(path.T()));
    for (int t = 1; t <= path.T(); ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const Vector& prev = path.iterates[ti - 1];
        const Vector& cur = path.iterates[ti];
        const double lhs = trace.risks[ti] - at_w.value;
        const double rhs =
            ((prev - w).squaredNorm() - (cur - w).squaredNorm()) / (2.0 * path.gamma) +
            (trace.gradients[ti - 1] - path.empirical_gradients[ti - 1]).dot(cur - w);
        const double noise = trace.risk_std_errors[ti] + at_w.std_error +
                             trace.gradient_std_errors[ti - 1] * (cur - w).norm();
        out.push_back({lhs - rhs, kExactTolerance + 3.0 * noise, pre.smooth_ok});
    }
    return out;
}

Residual check_risk_step(const LossModel& loss, const Dataset& data,
                         const PopulationOracle& oracle, const DescentPath& path, int t,
                         const Vector& w) {
    require_index(path, t, 1, path.T());
    DescentPath two_step;
    two_step.gamma = path.gamma;
    two_step.iterates = {path.iterates[static_cast<std::size_t>(t) - 1],
                         path.iterates[static_cast<std::size_t>(t)]};
    two_step.empirical_gradients = {path.empirical_gradients[static_cast<std::size_t>(t) - 1]};
    const auto trace = trace_oracle(oracle, two_step);
    return risk_step_residuals(loss, data, oracle, two_step, trace, w).front();
}

std::vector<Residual> path_recursion_residuals(const LossModel& loss, const Dataset& data,
                                               const PopulationOracle& oracle,
                                               const DescentPath& path, const OracleTrace& trace) {
    require_positive_step(path);
    const auto pre = step_preconditions(loss, data, path.gamma);
    const bool ok = pre.smooth_ok && pre.unit_ok;
    const Vector& w_star = oracle.w_star();
    const double kappa_l = data.kappa * loss.lipschitz();
    const double start = (path.iterates.front() - w_star).squaredNorm();
    double sum = 0.0;
    double noise = 0.0;
    std::vector<Residual> out;
    out.reserve(static_cast<std::size_t>(path.T()));
    for (int t = 0; t < path.T(); ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const Vector e = trace.gradients[ti] - path.empirical_gradients[ti];
        const Vector offset = path.iterates[ti] - w_star;
        sum += e.dot(offset) + kappa_l * e.norm();
        noise += trace.gradient_std_errors[ti] * (offset.norm() + kappa_l);
        const double lhs = (path.iterates[ti + 1] - w_star).squaredNorm();
        out.push_back({lhs - (start + 2.0 * path.gamma * sum),
                       kExactTolerance + 3.0 * 2.0 * path.gamma * noise, ok});
    }
    return out;
}

Residual check_path_recursion(const LossModel& loss, const Dataset& data,
                              const PopulationOracle& oracle, const DescentPath& path, int t) {
    require_index(path, t, 0, path.T() - 1);
    DescentPath prefix;
    prefix.gamma = path.gamma;
    prefix.iterates.assign(path.iterates.begin(), path.iterates.begin() + t + 2);
    prefix.empirical_gradients.assign(path.empirical_gradients.begin(),
                                      path.empirical_gradients.begin() + t + 1);
    const auto trace = trace_oracle(oracle, prefix);
    return path_recursion_residuals(loss, data, oracle, prefix, trace).back();
}

DecompositionReport decompose(const LossModel& loss, const Dataset& data,
                              const PopulationOracle& oracle, const DescentPath& path,
                              const Vector& w, const DecomposeOptions& options) {
    require_positive_step(path);
    const int T = path.T();
    if (T < 1) throw std::invalid_argument("decomposition needs T >= 1");
    const auto trace = trace_oracle(oracle, path);
    const auto at_w = oracle.risk(w);
    const auto Ts = static_cast<std::size_t>(T);

    DecompositionReport report;
    report.precondition_ok = step_preconditions(loss, data, path.gamma).smooth_ok;
    report.bias_term = (path.iterates.front() - w).squaredNorm() / (2.0 * path.gamma * T);

    // xi_s = grad L(v_{s-1}) - grad L_hat(v_{s-1}), s = 1..T
    std::vector<Vector> xi;
    xi.reserve(Ts);
    for (std::size_t s = 1; s <= Ts; ++s)
        xi.push_back(trace.gradients[s - 1] - path.empirical_gradients[s - 1]);

    double variance_sum = 0.0;
    double risk_sum = 0.0;
    double noise = 0.0;
    report.variance_terms.reserve(Ts);
    for (std::size_t t = 1; t <= Ts; ++t) {
        const double term = options.variance_sign * xi[t - 1].dot(path.iterates[t] - w);
        report.variance_terms.push_back(term);
        variance_sum += term;
        risk_sum += trace.risks[t];
        noise += trace.risk_std_errors[t] +
                 trace.gradient_std_errors[t - 1] * (path.iterates[t] - w).norm();
    }
    report.rhs_avg = report.bias_term + variance_sum / T;
    report.mean_risk_gap = risk_sum / T - at_w.value;

    const auto averaged = oracle.risk(averaged_iterate(path));
    report.lhs_avg = averaged.value - at_w.value;
    report.lhs_last = trace.risks[Ts] - at_w.value;

    // Suffix sums over s = T-t+1..T of <xi_s, v_s> and xi_s.
    double inner_suffix = 0.0;
    Vector xi_suffix = Vector::Zero(w.size());
    double correction_sum = 0.0;
    report.last_iterate_correction.reserve(Ts > 0 ? Ts - 1 : 0);
    for (std::size_t t = 1; t < Ts; ++t) {
        const std::size_t s = Ts - t + 1;
        inner_suffix += xi[s - 1].dot(path.iterates[s]);
        xi_suffix += xi[s - 1];
        const double inner = inner_suffix - xi_suffix.dot(path.iterates[Ts - t]);
        const double weighted =
            options.variance_sign * inner / (static_cast<double>(t) * static_cast<double>(t + 1));
        report.last_iterate_correction.push_back(weighted);
        correction_sum += weighted;
    }
    report.rhs_last = report.mean_risk_gap + correction_sum;

    report.tolerance =
        options.tolerance + 3.0 * (averaged.std_error + at_w.std_error + noise / T);
    return report;
}

double path_radius(const Vector& w_star) { return std::max(1.0, 3.0 * w_star.norm()); }

BoundedPathResult check_bounded_path(std::span<const double> norms,
                                     std::span<const double> distances, double radius) {
    if (norms.size() != distances.size())
        throw std::invalid_argument("norms and distances must have the same length");
    for (std::size_t t = 1; t < norms.size(); ++t) {
        if (norms[t] > radius || distances[t] > 2.0 * radius / 3.0)
            return {false, static_cast<int>(t)};
    }
    return {true, std::nullopt};
}

BoundedPathResult check_bounded_path(const DescentPath& path, const Vector& w_star,
                                     double radius) {
    std::vector<double> norms;
    std::vector<double> distances;
    for (const auto& v : path.iterates) {
        norms.push_back(v.norm());
        distances.push_back((v - w_star).norm());
    }
    return check_bounded_path(norms, distances, radius);
}

namespace {

double log_term_of(double delta) {
    if (!(delta > 0.0) || !(delta < 4.0))
        throw std::invalid_argument(fmt::format("delta must lie in (0, 4), got {}", delta));
    return std::log(4.0 / delta);
}

}  // namespace

bool sample_size_condition_log(std::size_t n, double gamma_T, double kappa, double lipschitz,
                               double smoothness, double log_term) {
    const double factor = 90.0 * gamma_T * kappa * kappa * (1.0 + kappa * lipschitz) *
                          (smoothness + lipschitz);
    return std::sqrt(static_cast<double>(n)) >= std::max(1.0, factor) * std::sqrt(log_term);
}

bool sample_size_condition(std::size_t n, double gamma_T, double kappa, double lipschitz,
                           double smoothness, double delta) {
    return sample_size_condition_log(n, gamma_T, kappa, lipschitz, smoothness, log_term_of(delta));
}

double schedule_gamma_T_log(std::size_t n, double kappa, double lipschitz, double smoothness,
                            double log_term) {
    return std::sqrt(static_cast<double>(n)) /
           (90.0 * kappa * kappa * (1.0 + kappa * lipschitz) * (smoothness + lipschitz) *
            std::sqrt(log_term));
}

double schedule_gamma_T(std::size_t n, double kappa, double lipschitz, double smoothness,
                        double delta) {
    return schedule_gamma_T_log(n, kappa, lipschitz, smoothness, log_term_of(delta));
}

ExcessRiskBounds excess_risk_bounds_log(std::size_t n, double gamma_T, double log_T, double log_term,
                                 double w_star_norm_sq, double kappa, double lipschitz,
                                 double smoothness) {
    const double rate = std::sqrt(log_term / static_cast<double>(n));
    const double scale = std::max(1.0, w_star_norm_sq) * kappa * kappa;
    const double bias = w_star_norm_sq / (2.0 * gamma_T);
    const double base = scale * (smoothness + lipschitz) * rate;
    const double scheduled = base * (1.0 + kappa * lipschitz);
    return {bias + 180.0 * base, bias + 425.0 * base * log_T, 225.0 * scheduled,
            470.0 * scheduled * log_T};
}

ExcessRiskBounds excess_risk_bounds(std::size_t n, double gamma, int T, double delta,
                             const Vector& w_star, double kappa, double lipschitz,
                             double smoothness) {
    if (T < 3) throw std::invalid_argument("excess risk bounds need T >= 3");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    return excess_risk_bounds_log(n, gamma * T, std::log(static_cast<double>(T)), std::log(4.0 / delta),
                              w_star.squaredNorm(), kappa, lipschitz, smoothness);
}

}  // namespace implreg
