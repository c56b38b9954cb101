#include "implreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "implreg/rng.hpp"

namespace implreg {

namespace {

constexpr double kExponentClamp = 700.0;

double clamp_exponent(double z) { return std::clamp(z, -kExponentClamp, kExponentClamp); }

// 2 log cosh(x) without cancellation near 0 or overflow for large |x|.
double two_log_cosh(double x) {
    const double ax = std::fabs(x);
    if (ax <= 0.5) {
        const double s = std::sinh(0.5 * ax);
        return 2.0 * std::log1p(2.0 * s * s);
    }
    return 2.0 * (ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2);
}

// log(1 + e^z)
double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// 1 / (1 + e^{-z})
double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Squared: return "squared";
        case LossKind::LogisticRegression: return "logistic_regression";
        case LossKind::LogisticClassification: return "logistic_classification";
        case LossKind::Exponential: return "exponential";
    }
    return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "squared") return LossKind::Squared;
    if (name == "logistic_regression") return LossKind::LogisticRegression;
    if (name == "logistic_classification") return LossKind::LogisticClassification;
    if (name == "exponential") return LossKind::Exponential;
    throw std::invalid_argument(fmt::format("unknown loss kind '{}'", name));
}

bool is_classification(LossKind kind) {
    return kind == LossKind::LogisticClassification || kind == LossKind::Exponential;
}

LossConstants loss_constants(LossKind kind, double kappa, double radius,
                             std::optional<double> label_bound) {
    if (!(kappa >= 1.0)) throw DomainError(fmt::format("kappa must be >= 1, got {}", kappa));
    if (!(radius >= 0.0)) throw DomainError(fmt::format("radius must be >= 0, got {}", radius));
    switch (kind) {
        case LossKind::Squared:
            if (!label_bound) throw DomainError("squared loss needs a label bound b");
            if (!(*label_bound >= 0.0)) throw DomainError("label bound must be nonnegative");
            return {2.0 * (*label_bound + kappa * radius), 2.0};
        case LossKind::LogisticRegression: return {1.0, 1.0};
        case LossKind::LogisticClassification: return {1.0, 0.25};
        case LossKind::Exponential: {
            const double e = std::exp(clamp_exponent(kappa * radius));
            return {e, e};
        }
    }
    throw DomainError("unknown loss kind");
}

LossModel::LossModel(LossKind kind, double kappa, double radius, std::optional<double> label_bound)
    : kind_(kind),
      kappa_(kappa),
      radius_(radius),
      label_bound_(label_bound),
      constants_(loss_constants(kind, kappa, radius, label_bound)) {
    if (radius <= 0.0) throw DomainError("radius must be positive");
}

void LossModel::validate_label(double y) const {
    if (!std::isfinite(y)) throw DomainError("label is not finite");
    if (is_classification(kind_) && y != 1.0 && y != -1.0)
        throw DomainError(
            fmt::format("label {} invalid for {}: expected -1 or 1", y, to_string(kind_)));
}

double LossModel::value(double y, double a) const {
    validate_label(y);
    switch (kind_) {
        case LossKind::Squared: return (y - a) * (y - a);
        case LossKind::LogisticRegression: return two_log_cosh(0.5 * (y - a));
        case LossKind::LogisticClassification: return softplus(clamp_exponent(-y * a));
        case LossKind::Exponential: return std::exp(clamp_exponent(-y * a));
    }
    return 0.0;
}

double LossModel::derivative(double y, double a) const {
    validate_label(y);
    switch (kind_) {
        case LossKind::Squared: return 2.0 * (a - y);
        case LossKind::LogisticRegression: return -std::tanh(0.5 * (y - a));
        case LossKind::LogisticClassification: return -y * logistic(clamp_exponent(-y * a));
        case LossKind::Exponential: return -y * std::exp(clamp_exponent(-y * a));
    }
    return 0.0;
}

double LossModel::second_derivative(double y, double a) const {
    validate_label(y);
    switch (kind_) {
        case LossKind::Squared: return 2.0;
        case LossKind::LogisticRegression: {
            const double c = std::cosh(std::min(0.5 * std::fabs(y - a), kExponentClamp));
            return 0.5 / (c * c);
        }
        case LossKind::LogisticClassification: {
            const double p = logistic(clamp_exponent(y * a));
            return p * (1.0 - p);
        }
        case LossKind::Exponential: return std::exp(clamp_exponent(-y * a));
    }
    return 0.0;
}

double loss_value(const LossModel& model, double y, double a) { return model.value(y, a); }
double loss_derivative(const LossModel& model, double y, double a) {
    return model.derivative(y, a);
}

double sample_label(const LossModel& model, Rng& rng) {
    switch (model.kind()) {
        case LossKind::Squared: {
            const double b = model.label_bound().value_or(1.0);
            return rng.uniform(-b, b);
        }
        case LossKind::LogisticRegression: {
            const double b = model.half_width() + 1.0;
            return rng.uniform(-b, b);
        }
        case LossKind::LogisticClassification:
        case LossKind::Exponential: return static_cast<double>(rng.sign());
    }
    return 0.0;
}

namespace {

double sample_argument(const LossModel& model, Rng& rng) {
    const double w = model.half_width();
    return rng.uniform(-w, w);
}

AssumptionCheck finish(std::string name, long samples, double worst, double tolerance) {
    return {std::move(name), samples, worst, tolerance, worst <= tolerance};
}

}  // namespace

AssumptionCheck check_derivative_consistency(const LossModel& model, Rng& rng, long samples,
                                             double step, double tolerance) {
    double worst = 0.0;
    for (long i = 0; i < samples; ++i) {
        const double y = sample_label(model, rng);
        const double a = sample_argument(model, rng);
        const double fd = (model.value(y, a + step) - model.value(y, a - step)) / (2.0 * step);
        const double exact = model.derivative(y, a);
        const double scale = std::max(std::fabs(exact), 1e-300);
        worst = std::max(worst, std::fabs(fd - exact) / scale);
    }
    return finish(fmt::format("{} derivative vs finite difference", to_string(model.kind())),
                  samples, worst, tolerance);
}

AssumptionCheck check_lipschitz(const LossModel& model, Rng& rng, long samples) {
    double worst = 0.0;
    const double lip = model.lipschitz();
    for (long i = 0; i < samples; ++i) {
        const double y = sample_label(model, rng);
        const double a = sample_argument(model, rng);
        const double b = sample_argument(model, rng);
        const double allowed = lip * std::fabs(a - b);
        const double excess = std::fabs(model.value(y, a) - model.value(y, b)) - allowed;
        worst = std::max(worst, excess / std::max(1.0, allowed));
    }
    return finish(fmt::format("{} Lipschitz with L={}", to_string(model.kind()), lip), samples,
                  worst, 1e-12);
}

AssumptionCheck check_smoothness(const LossModel& model, Rng& rng, long samples) {
    double worst = 0.0;
    const double smooth = model.smoothness();
    for (long i = 0; i < samples; ++i) {
        const double y = sample_label(model, rng);
        const double a = sample_argument(model, rng);
        const double b = sample_argument(model, rng);
        const double allowed = smooth * std::fabs(a - b);
        const double excess =
            std::fabs(model.derivative(y, a) - model.derivative(y, b)) - allowed;
        worst = std::max(worst, excess / std::max(1.0, allowed));
    }
    return finish(fmt::format("{} smooth with M={}", to_string(model.kind()), smooth), samples,
                  worst, 1e-12);
}

AssumptionCheck check_convexity(const LossModel& model, Rng& rng, long samples) {
    double worst = 0.0;
    for (long i = 0; i < samples; ++i) {
        const double y = sample_label(model, rng);
        const double a = sample_argument(model, rng);
        const double b = sample_argument(model, rng);
        const double lambda = rng.uniform();
        const double mid = model.value(y, lambda * a + (1.0 - lambda) * b);
        const double chord = lambda * model.value(y, a) + (1.0 - lambda) * model.value(y, b);
        worst = std::max(worst, mid - chord);
    }
    return finish(fmt::format("{} convex", to_string(model.kind())), samples, worst, 1e-12);
}

AssumptionCheck check_quadratic_upper_bound(const LossModel& model, Rng& rng, long samples) {
    double worst = 0.0;
    const double smooth = model.smoothness();
    for (long i = 0; i < samples; ++i) {
        const double y = sample_label(model, rng);
        const double a = sample_argument(model, rng);
        const double b = sample_argument(model, rng);
        const double upper = model.value(y, a) + model.derivative(y, a) * (b - a) +
                             0.5 * smooth * (b - a) * (b - a);
        worst = std::max(worst, model.value(y, b) - upper);
    }
    return finish(fmt::format("{} quadratic upper bound", to_string(model.kind())), samples,
                  worst, 1e-10);
}

AssumptionCheck check_nonnegative(const LossModel& model, Rng& rng, long samples) {
    double worst = 0.0;
    for (long i = 0; i < samples; ++i) {
        const double y = sample_label(model, rng);
        worst = std::max(worst, -model.value(y, sample_argument(model, rng)));
    }
    return finish(fmt::format("{} nonnegative", to_string(model.kind())), samples, worst, 0.0);
}

}  // namespace implreg
