#include "implreg/engine.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace implreg {

void DescentConfig::validate(std::size_t dimension) const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument(fmt::format("step size gamma must be >= 0, got {}", gamma));
    if (T < 1) throw std::invalid_argument(fmt::format("iteration count T must be >= 1, got {}", T));
    if (v0 && static_cast<std::size_t>(v0->size()) != dimension)
        throw std::invalid_argument(
            fmt::format("v0 has dimension {}, data has {}", v0->size(), dimension));
}

Vector DescentConfig::start(std::size_t dimension) const {
    return v0 ? *v0 : Vector::Zero(static_cast<Eigen::Index>(dimension));
}

DivergenceError::DivergenceError(int iteration, double norm)
    : std::runtime_error(
          fmt::format("gradient descent diverged at iteration {} (|v| = {})", iteration, norm)),
      iteration_(iteration) {}

namespace {

void check_dimension(const Dataset& data, const Vector& w) {
    if (static_cast<std::size_t>(w.size()) != data.d())
        throw std::invalid_argument(
            fmt::format("vector has dimension {}, data has {}", w.size(), data.d()));
}

// One pass over the data: risk and gradient at w from the same margins.
struct RiskAndGradient {
    double risk = 0.0;
    Vector gradient;
};

RiskAndGradient evaluate(const LossModel& loss, const Dataset& data, const Vector& w) {
    const Vector margins = data.xs * w;
    Vector slopes(margins.size());
    double total = 0.0;
    for (Eigen::Index j = 0; j < margins.size(); ++j) {
        total += loss.value(data.ys[j], margins[j]);
        slopes[j] = loss.derivative(data.ys[j], margins[j]);
    }
    const double inv_n = 1.0 / static_cast<double>(data.n());
    return {total * inv_n, (data.xs.transpose() * slopes) * inv_n};
}

void guard(int iteration, const Vector& v) {
    const double norm = v.norm();
    if (!std::isfinite(norm) || norm > kDivergenceNorm) throw DivergenceError(iteration, norm);
}

}  // namespace

double empirical_risk(const LossModel& loss, const Dataset& data, const Vector& w) {
    check_dimension(data, w);
    const Vector margins = data.xs * w;
    double total = 0.0;
    for (Eigen::Index j = 0; j < margins.size(); ++j) total += loss.value(data.ys[j], margins[j]);
    return total / static_cast<double>(data.n());
}

Vector empirical_gradient(const LossModel& loss, const Dataset& data, const Vector& w) {
    check_dimension(data, w);
    return evaluate(loss, data, w).gradient;
}

DescentPath run(const LossModel& loss, const Dataset& data, const DescentConfig& cfg) {
    cfg.validate(data.d());
    DescentPath path;
    path.gamma = cfg.gamma;
    path.iterates.reserve(static_cast<std::size_t>(cfg.T) + 1);
    path.empirical_gradients.reserve(static_cast<std::size_t>(cfg.T));
    path.empirical_risks.reserve(static_cast<std::size_t>(cfg.T) + 1);

    Vector v = cfg.start(data.d());
    guard(0, v);
    path.iterates.push_back(v);
    for (int t = 0; t < cfg.T; ++t) {
        auto step = evaluate(loss, data, v);
        v = v - cfg.gamma * step.gradient;
        guard(t + 1, v);
        path.empirical_risks.push_back(step.risk);
        path.empirical_gradients.push_back(std::move(step.gradient));
        path.iterates.push_back(v);
    }
    path.empirical_risks.push_back(empirical_risk(loss, data, v));
    return path;
}

StreamSummary run_streaming(const LossModel& loss, const Dataset& data, const DescentConfig& cfg,
                            const StepObserver& observer) {
    cfg.validate(data.d());
    StreamSummary summary;
    Vector v = cfg.start(data.d());
    guard(0, v);
    Vector sum = Vector::Zero(v.size());
    summary.norms.push_back(v.norm());
    for (int t = 0; t < cfg.T; ++t) {
        const auto step = evaluate(loss, data, v);
        summary.empirical_risks.push_back(step.risk);
        v -= cfg.gamma * step.gradient;
        guard(t + 1, v);
        sum += v;
        summary.norms.push_back(v.norm());
        if (observer) observer(t + 1, v, sum / static_cast<double>(t + 1));
    }
    summary.empirical_risks.push_back(empirical_risk(loss, data, v));
    summary.average = sum / static_cast<double>(cfg.T);
    summary.last = std::move(v);
    return summary;
}

Vector averaged_iterate(const DescentPath& path) {
    if (path.T() < 1) throw std::invalid_argument("averaged iterate needs T >= 1");
    Vector sum = Vector::Zero(path.iterates.front().size());
    for (std::size_t t = 1; t < path.iterates.size(); ++t) sum += path.iterates[t];
    return sum / static_cast<double>(path.T());
}

Vector last_iterate(const DescentPath& path) { return path.iterates.back(); }

void write_path_csv(const std::filesystem::path& file, const DescentPath& path,
                    const std::optional<Vector>& w_star) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    out << "t,norm,dist_to_w_star,empirical_risk\n";
    for (std::size_t t = 0; t < path.iterates.size(); ++t) {
        const auto& v = path.iterates[t];
        const std::string dist = w_star ? fmt::format("{}", (v - *w_star).norm()) : std::string{};
        out << fmt::format("{},{},{},{}\n", t, v.norm(), dist, path.empirical_risks[t]);
    }
}

}  // namespace implreg
