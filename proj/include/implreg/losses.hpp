#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace implreg {

class Rng;

/// Thrown when a label is outside the label set of a loss, or a loss is
/// constructed with inconsistent parameters.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class LossKind { Squared, LogisticRegression, LogisticClassification, Exponential };

/// Config names: "squared", "logistic_regression", "logistic_classification", "exponential".
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// True for losses whose labels must be in {-1, 1}.
bool is_classification(LossKind kind);

struct LossConstants {
    double lipschitz = 0.0;   ///< L: Lipschitz modulus of l(y, .) on [-kappa R, kappa R]
    double smoothness = 0.0;  ///< M: Lipschitz modulus of l'(y, .) on the same interval
};

/// Interval-valid constants for the loss on [-kappa * radius, kappa * radius].
/// `label_bound` is b with labels in [-b, b]; required for the squared loss.
LossConstants loss_constants(LossKind kind, double kappa, double radius,
                             std::optional<double> label_bound = std::nullopt);

/// A convex, Lipschitz, smooth loss l(y, a) together with the constants that
/// certify it on the working interval [-kappa R, kappa R]. Immutable.
///
/// Evaluation is allowed outside the working interval (gradient paths can
/// leave the ball); only the constants are restricted to it.
class LossModel {
public:
    LossModel(LossKind kind, double kappa, double radius,
              std::optional<double> label_bound = std::nullopt);

    LossKind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    double radius() const { return radius_; }
    std::optional<double> label_bound() const { return label_bound_; }
    double lipschitz() const { return constants_.lipschitz; }
    double smoothness() const { return constants_.smoothness; }
    /// Half-width kappa * R of the working interval.
    double half_width() const { return kappa_ * radius_; }

    double value(double y, double a) const;
    /// Derivative in the second argument.
    double derivative(double y, double a) const;
    double second_derivative(double y, double a) const;

    /// Throws DomainError for labels outside {-1, 1} on classification losses,
    /// and for non-finite labels on any loss.
    void validate_label(double y) const;

private:
    LossKind kind_;
    double kappa_;
    double radius_;
    std::optional<double> label_bound_;
    LossConstants constants_;
};

double loss_value(const LossModel& model, double y, double a);
double loss_derivative(const LossModel& model, double y, double a);

/// Outcome of a randomized check of one assumption on the working interval.
struct AssumptionCheck {
    std::string name;
    long samples = 0;
    double worst = 0.0;  ///< largest observed violation (or relative error)
    double tolerance = 0.0;
    bool passed = false;
};

/// Draws a label from the loss's label set: {-1, 1} for classification,
/// uniform on [-b, b] for the squared loss, and on [-(kappa R + 1), kappa R + 1]
/// for logistic regression.
double sample_label(const LossModel& model, Rng& rng);

/// Central finite differences vs loss_derivative, relative error.
AssumptionCheck check_derivative_consistency(const LossModel& model, Rng& rng, long samples,
                                             double step = 1e-5, double tolerance = 1e-6);
/// |l(y,a) - l(y,b)| <= L |a - b|.
AssumptionCheck check_lipschitz(const LossModel& model, Rng& rng, long samples);
/// |l'(y,a) - l'(y,b)| <= M |a - b|.
AssumptionCheck check_smoothness(const LossModel& model, Rng& rng, long samples);
/// l(y, la + (1-l)b) <= l l(y,a) + (1-l) l(y,b) + 1e-12.
AssumptionCheck check_convexity(const LossModel& model, Rng& rng, long samples);
/// l(y,b) <= l(y,a) + l'(y,a)(b-a) + (M/2)(b-a)^2 + 1e-10.
AssumptionCheck check_quadratic_upper_bound(const LossModel& model, Rng& rng, long samples);
/// l >= 0 on the working interval.
AssumptionCheck check_nonnegative(const LossModel& model, Rng& rng, long samples);

}  // namespace implreg
