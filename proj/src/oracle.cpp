#include "implreg/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "implreg/engine.hpp"
#include "implreg/rng.hpp"

namespace implreg {

std::string to_string(OracleMode mode) {
    switch (mode) {
        case OracleMode::AnalyticSquared: return "analytic_squared";
        case OracleMode::GaussianQuadrature: return "gaussian_quadrature";
        case OracleMode::MonteCarlo: return "monte_carlo";
    }
    return "unknown";
}

OracleMode parse_oracle_mode(const std::string& name) {
    if (name == "analytic_squared" || name == "analytic") return OracleMode::AnalyticSquared;
    if (name == "gaussian_quadrature" || name == "quadrature") return OracleMode::GaussianQuadrature;
    if (name == "monte_carlo") return OracleMode::MonteCarlo;
    throw std::invalid_argument(fmt::format("unknown oracle mode '{}'", name));
}

std::string to_string(MinimizerSource source) {
    switch (source) {
        case MinimizerSource::Generating: return "generating";
        case MinimizerSource::Located: return "located";
        case MinimizerSource::Supplied: return "supplied";
    }
    return "unknown";
}

void gauss_hermite_rule(int nodes, std::vector<double>& points, std::vector<double>& weights) {
    if (nodes < 1) throw std::invalid_argument("quadrature needs at least one node");
    // Jacobi matrix of the probabilists' Hermite recurrence.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int k = 1; k < nodes; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    points.resize(static_cast<std::size_t>(nodes));
    weights.resize(static_cast<std::size_t>(nodes));
    double total = 0.0;
    for (int k = 0; k < nodes; ++k) {
        points[static_cast<std::size_t>(k)] = solver.eigenvalues()[k];
        const double first = solver.eigenvectors()(0, k);
        weights[static_cast<std::size_t>(k)] = first * first;
        total += first * first;
    }
    for (auto& w : weights) w /= total;
}

namespace {

void require_gaussian_regression(const SyntheticModel& model, std::string_view what) {
    model.validate();
    if (model.labels != LabelKind::Regression)
        throw std::invalid_argument(fmt::format("{} oracle needs regression labels", what));
    if (model.kappa_cap)
        throw std::invalid_argument(
            fmt::format("{} oracle assumes an untruncated Gaussian design", what));
}

bool generating_vector_is_minimizer(const SyntheticModel& model, LossKind kind) {
    // Residual losses that are even in y - a, with symmetric noise.
    return model.labels == LabelKind::Regression &&
           (kind == LossKind::Squared || kind == LossKind::LogisticRegression);
}

}  // namespace

PopulationOracle PopulationOracle::analytic_squared(const SyntheticModel& model,
                                                    const LossModel& loss) {
    if (loss.kind() != LossKind::Squared)
        throw std::invalid_argument("analytic oracle is only valid for the squared loss");
    require_gaussian_regression(model, "analytic");
    PopulationOracle oracle(OracleMode::AnalyticSquared, loss);
    oracle.w_star_ = model.w_star;
    oracle.sigma_diag_ = model.sigma_diag;
    oracle.noise_var_ = model.noise_sd * model.noise_sd;
    return oracle;
}

PopulationOracle PopulationOracle::gaussian_quadrature(const SyntheticModel& model,
                                                       const LossModel& loss, int nodes) {
    if (loss.kind() != LossKind::Squared && loss.kind() != LossKind::LogisticRegression)
        throw std::invalid_argument("quadrature oracle needs a loss of the residual y - a");
    require_gaussian_regression(model, "quadrature");
    PopulationOracle oracle(OracleMode::GaussianQuadrature, loss);
    oracle.w_star_ = model.w_star;
    oracle.sigma_diag_ = model.sigma_diag;
    oracle.noise_var_ = model.noise_sd * model.noise_sd;
    gauss_hermite_rule(nodes, oracle.nodes_, oracle.weights_);
    return oracle;
}

PopulationOracle PopulationOracle::monte_carlo(const SyntheticModel& model, const LossModel& loss,
                                               std::size_t m, std::uint64_t seed) {
    if (m < 2) throw std::invalid_argument("Monte Carlo oracle needs m >= 2 samples");
    PopulationOracle oracle(OracleMode::MonteCarlo, loss);
    oracle.seed_ = seed;
    oracle.holdout_ = sample(model, m, derive_seed(seed, "population-oracle"));
    if (generating_vector_is_minimizer(model, loss.kind())) {
        oracle.w_star_ = model.w_star;
        oracle.source_ = MinimizerSource::Generating;
    } else {
        oracle.w_star_ = Vector::Zero(static_cast<Eigen::Index>(model.d));
        oracle.locate_minimizer();
    }
    oracle.loss_at_w_star_.resize(oracle.holdout_->ys.size());
    const Vector margins = oracle.holdout_->xs * oracle.w_star_;
    for (Eigen::Index j = 0; j < margins.size(); ++j)
        oracle.loss_at_w_star_[j] = loss.value(oracle.holdout_->ys[j], margins[j]);
    return oracle;
}

PopulationOracle PopulationOracle::from_sample(Dataset sample_data, const LossModel& loss,
                                               std::optional<Vector> w_star) {
    sample_data.validate();
    if (sample_data.n() < 2) throw std::invalid_argument("Monte Carlo oracle needs m >= 2 samples");
    PopulationOracle oracle(OracleMode::MonteCarlo, loss);
    oracle.holdout_ = std::move(sample_data);
    if (w_star) {
        if (static_cast<std::size_t>(w_star->size()) != oracle.holdout_->d())
            throw std::invalid_argument("supplied w_star has the wrong dimension");
        oracle.w_star_ = *w_star;
        oracle.source_ = MinimizerSource::Supplied;
    } else {
        oracle.w_star_ = Vector::Zero(static_cast<Eigen::Index>(oracle.holdout_->d()));
        oracle.locate_minimizer();
    }
    oracle.loss_at_w_star_.resize(oracle.holdout_->ys.size());
    const Vector margins = oracle.holdout_->xs * oracle.w_star_;
    for (Eigen::Index j = 0; j < margins.size(); ++j)
        oracle.loss_at_w_star_[j] = loss.value(oracle.holdout_->ys[j], margins[j]);
    return oracle;
}

// Damped Newton on the holdout risk until the gradient norm is <= 1e-6.
void PopulationOracle::locate_minimizer() {
    const Dataset& data = *holdout_;
    const double inv_m = 1.0 / static_cast<double>(data.n());
    Vector w = w_star_;
    for (int iter = 0; iter < 200; ++iter) {
        const Vector margins = data.xs * w;
        Vector slopes(margins.size());
        Vector curvature(margins.size());
        for (Eigen::Index j = 0; j < margins.size(); ++j) {
            slopes[j] = loss_.derivative(data.ys[j], margins[j]);
            curvature[j] = loss_.second_derivative(data.ys[j], margins[j]);
        }
        const Vector grad = data.xs.transpose() * slopes * inv_m;
        if (grad.norm() <= 1e-6) break;
        Eigen::MatrixXd hessian = data.xs.transpose() * curvature.asDiagonal() * data.xs * inv_m;
        hessian.diagonal().array() += 1e-12;
        const Vector step = hessian.ldlt().solve(grad);
        const double current = empirical_risk(loss_, data, w);
        double t = 1.0;
        while (t > 1e-10 && empirical_risk(loss_, data, w - t * step) > current - 1e-4 * t * grad.dot(step))
            t *= 0.5;
        w -= t * step;
    }
    w_star_ = std::move(w);
    source_ = MinimizerSource::Located;
}

void PopulationOracle::check(const Vector& w) const {
    if (w.size() != w_star_.size())
        throw std::invalid_argument(
            fmt::format("vector has dimension {}, oracle has {}", w.size(), w_star_.size()));
}

double PopulationOracle::quadrature_mean(double scale, bool second) const {
    double total = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const double residual = scale * nodes_[k];
        // l(y, a) with y - a = residual
        total += weights_[k] * (second ? loss_.second_derivative(residual, 0.0)
                                       : loss_.value(residual, 0.0));
    }
    return total;
}

RiskEstimate PopulationOracle::risk(const Vector& w) const {
    check(w);
    switch (mode_) {
        case OracleMode::AnalyticSquared: {
            const Vector delta = w - w_star_;
            return {delta.dot(sigma_diag_.cwiseProduct(delta)) + noise_var_, 0.0};
        }
        case OracleMode::GaussianQuadrature: {
            const Vector delta = w - w_star_;
            const double q = delta.dot(sigma_diag_.cwiseProduct(delta));
            return {quadrature_mean(std::sqrt(noise_var_ + q), false), 0.0};
        }
        case OracleMode::MonteCarlo: {
            const Dataset& data = *holdout_;
            const Vector margins = data.xs * w;
            double sum = 0.0;
            double sum_sq = 0.0;
            for (Eigen::Index j = 0; j < margins.size(); ++j) {
                const double v = loss_.value(data.ys[j], margins[j]);
                sum += v;
                sum_sq += v * v;
            }
            const double m = static_cast<double>(data.n());
            const double mean = sum / m;
            const double var = std::max(0.0, (sum_sq / m - mean * mean) * m / (m - 1.0));
            return {mean, std::sqrt(var / m)};
        }
    }
    return {};
}

GradientEstimate PopulationOracle::gradient(const Vector& w) const {
    check(w);
    const Vector delta = w - w_star_;
    switch (mode_) {
        case OracleMode::AnalyticSquared:
            return {2.0 * sigma_diag_.cwiseProduct(delta), Vector::Zero(w.size())};
        case OracleMode::GaussianQuadrature: {
            const double q = delta.dot(sigma_diag_.cwiseProduct(delta));
            const double curvature = quadrature_mean(std::sqrt(noise_var_ + q), true);
            return {curvature * sigma_diag_.cwiseProduct(delta), Vector::Zero(w.size())};
        }
        case OracleMode::MonteCarlo: {
            const Dataset& data = *holdout_;
            const Vector margins = data.xs * w;
            Vector slopes(margins.size());
            for (Eigen::Index j = 0; j < margins.size(); ++j)
                slopes[j] = loss_.derivative(data.ys[j], margins[j]);
            const double m = static_cast<double>(data.n());
            const Vector mean = data.xs.transpose() * slopes / m;
            Eigen::ArrayXd second = Eigen::ArrayXd::Zero(w.size());
            for (Eigen::Index j = 0; j < margins.size(); ++j)
                second += (slopes[j] * slopes[j]) * data.xs.row(j).transpose().array().square();
            second /= m;
            const Vector var =
                ((second - mean.array().square()) * (m / (m - 1.0))).max(0.0).matrix();
            return {mean, (var.array() / m).sqrt().matrix()};
        }
    }
    return {};
}

ExcessRisk PopulationOracle::excess_risk(const Vector& w) const {
    check(w);
    if (mode_ != OracleMode::MonteCarlo) {
        const double raw = risk(w).value - risk(w_star_).value;
        return {raw, raw, 0.0};
    }
    const Dataset& data = *holdout_;
    const Vector margins = data.xs * w;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (Eigen::Index j = 0; j < margins.size(); ++j) {
        const double diff = loss_.value(data.ys[j], margins[j]) - loss_at_w_star_[j];
        sum += diff;
        sum_sq += diff * diff;
    }
    const double m = static_cast<double>(data.n());
    const double mean = sum / m;
    const double var = std::max(0.0, (sum_sq / m - mean * mean) * m / (m - 1.0));
    const double se = std::sqrt(var / m);
    const double value = (mean < 0.0 && mean >= -3.0 * se) ? 0.0 : mean;
    return {value, mean, se};
}

OracleSummary PopulationOracle::summary() const {
    OracleSummary s;
    s.mode = mode_;
    s.samples = holdout_ ? holdout_->n() : 0;
    s.seed = seed_;
    s.w_star = w_star_;
    s.risk_at_w_star = risk(w_star_).value;
    s.source = source_;
    s.approximate = source_ == MinimizerSource::Located;
    s.gradient_norm_at_w_star = gradient(w_star_).value.norm();
    return s;
}

double population_risk(const PopulationOracle& oracle, const Vector& w) {
    return oracle.risk(w).value;
}

Vector population_gradient(const PopulationOracle& oracle, const Vector& w) {
    return oracle.gradient(w).value;
}

double excess_risk(const PopulationOracle& oracle, const Vector& w) {
    return oracle.excess_risk(w).value;
}

Vector gradient_noise(const PopulationOracle& oracle, const LossModel& loss, const Dataset& data,
                      const Vector& w) {
    return empirical_gradient(loss, data, w) - oracle.gradient(w).value;
}

}  // namespace implreg
