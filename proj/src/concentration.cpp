#include "implreg/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "implreg/engine.hpp"
#include "implreg/oracle.hpp"
#include "implreg/rng.hpp"

namespace implreg {

void FunctionClassSpec::validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument(fmt::format("function class radius must be positive, got {}", radius));
    if (kind == FunctionClassKind::GradientComposite && !loss)
        throw std::invalid_argument("gradient composite class needs a loss");
}

LossDerivatives derivatives_of(const LossModel& loss) {
    return {[loss](double y, double a) { return loss.derivative(y, a); },
            [loss](double y, double a) { return loss.second_derivative(y, a); }};
}

namespace {

void check_inputs(const Dataset& data, double radius, const SignMethod& method) {
    if (data.n() == 0) throw std::invalid_argument("Rademacher estimate needs n >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
    if (method.kind == SignMethod::Kind::Exhaustive && data.n() > kMaxExhaustiveSamples)
        throw std::invalid_argument(fmt::format(
            "exhaustive enumeration refused for n = {} (limit {})", data.n(), kMaxExhaustiveSamples));
    if (method.kind == SignMethod::Kind::MonteCarlo && method.draws < 2)
        throw std::invalid_argument("Monte Carlo needs at least 2 sign draws");
}

// Averages f(signs) over the sign vectors of the method.
template <class F>
RademacherEstimate average_over_signs(std::size_t n, const SignMethod& method, F&& f) {
    std::vector<int> signs(n);
    RademacherEstimate est;
    est.method = method;
    if (method.kind == SignMethod::Kind::Exhaustive) {
        const std::uint64_t count = std::uint64_t{1} << n;
        long double sum = 0.0L;
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            for (std::size_t j = 0; j < n; ++j) signs[j] = (mask >> j) & 1U ? -1 : 1;
            sum += f(signs);
        }
        est.value = static_cast<double>(sum / static_cast<long double>(count));
        est.std_error = 0.0;
        return est;
    }
    Rng rng(derive_seed(method.seed, "rademacher-signs"));
    double mean = 0.0;
    double m2 = 0.0;
    for (long k = 0; k < method.draws; ++k) {
        for (auto& s : signs) s = rng.sign();
        const double value = f(signs);
        const double delta = value - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (value - mean);
    }
    est.value = mean;
    const double variance = m2 / static_cast<double>(method.draws - 1);
    est.std_error = std::sqrt(variance / static_cast<double>(method.draws));
    return est;
}

// Probe directions are fixed per (data, options), so the per-draw estimate
// is a deterministic function of the signs.
class GradientSupremum {
public:
    GradientSupremum(const LossDerivatives& loss, const Dataset& data, double radius,
                     const ProbeOptions& probes)
        : loss_(loss), data_(data), radius_(radius), probes_(probes) {
        if (probes.directions < 1) throw std::invalid_argument("probe set needs >= 1 direction");
        if (probes.ascents < 0 || probes.ascent_steps < 0)
            throw std::invalid_argument("ascent counts must be nonnegative");
        const auto n = static_cast<Eigen::Index>(data.n());
        const auto d = static_cast<Eigen::Index>(data.d());
        const auto P = static_cast<Eigen::Index>(probes.directions);
        Rng rng(derive_seed(probes.seed, "gradient-probes"));
        points_.resize(d, P);
        for (Eigen::Index p = 0; p < P; ++p) {
            for (Eigen::Index i = 0; i < d; ++i) points_(i, p) = rng.normal();
            const double norm = points_.col(p).norm();
            if (norm > 0.0) points_.col(p) *= radius / norm;
        }
        const Eigen::MatrixXd margins = data.xs * points_;
        slopes_.resize(n, P);
        for (Eigen::Index p = 0; p < P; ++p)
            for (Eigen::Index j = 0; j < n; ++j)
                slopes_(j, p) = loss.first(data.ys(j), margins(j, p));
        margin_.resize(n);
        weights_.resize(n);
        g_.resize(d);
        grad_.resize(d);
        cand_.resize(d);
        order_.resize(static_cast<std::size_t>(P));
    }

    double operator()(const std::vector<int>& signs) {
        const auto n = static_cast<Eigen::Index>(data_.n());
        const double inv_n = 1.0 / static_cast<double>(n);
        Eigen::VectorXd eps(n);
        for (Eigen::Index j = 0; j < n; ++j) eps(j) = signs[static_cast<std::size_t>(j)];
        const Eigen::MatrixXd weighted = slopes_.array().colwise() * eps.array();
        const Eigen::MatrixXd gs = data_.xs.transpose() * weighted * inv_n;
        const Eigen::VectorXd values = gs.colwise().norm();

        std::iota(order_.begin(), order_.end(), 0);
        const auto starts = std::min<std::size_t>(order_.size(),
                                                   static_cast<std::size_t>(probes_.ascents));
        std::partial_sort(order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(starts),
                          order_.end(), [&](int a, int b) { return values(a) > values(b); });
        double best = values(order_.front());
        for (std::size_t k = 0; k < starts; ++k)
            best = std::max(best, ascend(points_.col(order_[k]), eps));
        return best;
    }

private:
    // Half squared norm of the signed empirical gradient average at v and its
    // gradient in v, left in g_ and grad_.
    double evaluate(const Eigen::VectorXd& v, const Eigen::VectorXd& eps) {
        const auto n = static_cast<Eigen::Index>(data_.n());
        const double inv_n = 1.0 / static_cast<double>(n);
        margin_.noalias() = data_.xs * v;
        for (Eigen::Index j = 0; j < n; ++j)
            weights_(j) = eps(j) * loss_.first(data_.ys(j), margin_(j));
        g_.noalias() = data_.xs.transpose() * weights_;
        g_ *= inv_n;
        margin_.noalias() = data_.xs * g_;
        for (Eigen::Index j = 0; j < n; ++j)
            weights_(j) = eps(j) * loss_.second(data_.ys(j), data_.xs.row(j).dot(v)) * margin_(j);
        grad_.noalias() = data_.xs.transpose() * weights_;
        grad_ *= inv_n;
        return 0.5 * g_.squaredNorm();
    }

    void project(Eigen::VectorXd& v) const {
        const double norm = v.norm();
        if (norm > radius_) v *= radius_ / norm;
    }

    double ascend(Eigen::VectorXd v, const Eigen::VectorXd& eps) {
        double f = evaluate(v, eps);
        Eigen::VectorXd direction = grad_;
        double step = 0.25 * radius_;
        for (int it = 0; it < probes_.ascent_steps; ++it) {
            const double gnorm = direction.norm();
            if (!(gnorm > 0.0) || step < 1e-8 * radius_) break;
            cand_ = v + (step / gnorm) * direction;
            project(cand_);
            const double fc = evaluate(cand_, eps);
            if (fc > f) {
                v = cand_;
                f = fc;
                direction = grad_;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        return std::sqrt(2.0 * f);
    }

    const LossDerivatives& loss_;
    const Dataset& data_;
    double radius_;
    ProbeOptions probes_;
    Eigen::MatrixXd points_;  // d x P
    Eigen::MatrixXd slopes_;  // n x P, l'(y_j, <x_j, u_p>)
    Eigen::VectorXd margin_, weights_, g_, grad_, cand_;
    std::vector<int> order_;
};

}  // namespace

RademacherEstimate rademacher_scalar(const Dataset& data, double radius, const SignMethod& method) {
    check_inputs(data, radius, method);
    const double scale = radius / static_cast<double>(data.n());
    Eigen::VectorXd sum(static_cast<Eigen::Index>(data.d()));
    return average_over_signs(data.n(), method, [&](const std::vector<int>& signs) {
        sum.setZero();
        for (std::size_t j = 0; j < signs.size(); ++j)
            sum += signs[j] * data.xs.row(static_cast<Eigen::Index>(j)).transpose();
        return scale * sum.norm();
    });
}

RademacherEstimate rademacher_gradient(const LossDerivatives& loss, const Dataset& data,
                                       double radius, const SignMethod& method,
                                       const ProbeOptions& probes) {
    check_inputs(data, radius, method);
    GradientSupremum sup(loss, data, radius, probes);
    return average_over_signs(data.n(), method, sup);
}

RademacherEstimate rademacher_gradient(const LossModel& loss, const Dataset& data, double radius,
                                       const SignMethod& method, const ProbeOptions& probes) {
    return rademacher_gradient(derivatives_of(loss), data, radius, method, probes);
}

double gradient_class_supremum(const LossDerivatives& loss, const Dataset& data, double radius,
                               const std::vector<int>& signs, const ProbeOptions& probes) {
    if (signs.size() != data.n()) throw std::invalid_argument("one sign per sample required");
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
    GradientSupremum sup(loss, data, radius, probes);
    return sup(signs);
}

RademacherBounds rademacher_bounds(double kappa, double lipschitz, double smoothness, double radius,
                                std::size_t n) {
    if (n == 0) throw std::invalid_argument("bounds need n >= 1");
    const double root_n = std::sqrt(static_cast<double>(n));
    return {kappa * radius / root_n,
            2.0 * std::sqrt(2.0) * (kappa * lipschitz + kappa * kappa * smoothness * radius) /
                root_n};
}

ConcentrationBound concentration_bound_log(double kappa, double lipschitz, double smoothness,
                                           double radius, std::size_t n, double log_term) {
    if (!(log_term > 0.0)) throw std::invalid_argument("log(4/delta) must be positive");
    const double ratio = log_term / static_cast<double>(n);
    ConcentrationBound out;
    out.sup_bound = kappa * lipschitz;
    out.raw = 4.0 * rademacher_bounds(kappa, lipschitz, smoothness, radius, n).gradient +
              out.sup_bound * std::sqrt(2.0 * ratio) + out.sup_bound * 4.0 * ratio;
    out.simplified = 20.0 * kappa * kappa * radius * (lipschitz + smoothness) * std::sqrt(ratio);
    out.valid = static_cast<double>(n) >= log_term;
    return out;
}

ConcentrationBound concentration_bound(double kappa, double lipschitz, double smoothness,
                                       double radius, std::size_t n, double delta) {
    if (!(delta > 0.0 && delta < 4.0))
        throw std::invalid_argument(fmt::format("delta must lie in (0, 4), got {}", delta));
    return concentration_bound_log(kappa, lipschitz, smoothness, radius, n, std::log(4.0 / delta));
}

double empirical_sup_noise(const LossModel& loss, const Dataset& data,
                           const PopulationOracle& oracle, double radius, const ProbeSet& probes) {
    if (oracle.dimension() != data.d())
        throw std::invalid_argument("oracle and data dimensions differ");
    const auto d = static_cast<Eigen::Index>(data.d());
    const double inv_n = 1.0 / static_cast<double>(data.n());

    // For the squared loss the empirical gradient is 2 (Sigma_hat v - c).
    const bool quadratic = loss.kind() == LossKind::Squared;
    Eigen::MatrixXd sigma_hat;
    Vector cross;
    if (quadratic) {
        sigma_hat = data.xs.transpose() * data.xs * inv_n;
        cross = data.xs.transpose() * data.ys * inv_n;
    }
    auto noise_at = [&](const Vector& v) {
        Vector emp = quadratic ? Vector(2.0 * (sigma_hat * v - cross))
                               : empirical_gradient(loss, data, v);
        return (emp - oracle.gradient(v).value).norm();
    };

    Rng rng(derive_seed(probes.seed, "noise-probes"));
    auto direction = [&] {
        Vector u(d);
        for (Eigen::Index i = 0; i < d; ++i) u(i) = rng.normal();
        const double norm = u.norm();
        return norm > 0.0 ? Vector(u / norm) : u;
    };
    double best = 0.0;
    for (int k = 0; k < probes.ball_points; ++k) {
        const Vector u = direction();
        const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        best = std::max(best, noise_at(r * u));
    }
    for (int k = 0; k < probes.sphere_points; ++k) best = std::max(best, noise_at(radius * direction()));
    for (const auto& v : probes.extra) {
        if (v.size() != d) throw std::invalid_argument("probe point has the wrong dimension");
        if (v.norm() <= radius) best = std::max(best, noise_at(v));
    }
    return best;
}

}  // namespace implreg
