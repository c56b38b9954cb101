#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "implreg/data.hpp"
#include "implreg/losses.hpp"

namespace implreg {

enum class OracleMode {
    AnalyticSquared,     ///< closed form under the Gaussian model, squared loss
    GaussianQuadrature,  ///< 1-d Gauss-Hermite reduction for residual losses
    MonteCarlo,          ///< sample means over a holdout sample
};

std::string to_string(OracleMode mode);
OracleMode parse_oracle_mode(const std::string& name);

/// Where the oracle's minimizer came from.
enum class MinimizerSource {
    Generating,  ///< the model's generating vector, exact by a symmetry argument
    Located,     ///< numerically minimized risk of the holdout sample (approximate)
    Supplied,    ///< passed in by the caller
};

std::string to_string(MinimizerSource source);

struct RiskEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct GradientEstimate {
    Vector value;
    Vector std_error;  ///< coordinatewise; zero for the analytic modes
    double norm_std_error() const { return std_error.norm(); }
};

struct ExcessRisk {
    double value = 0.0;      ///< raw, or 0 when raw is negative within 3 standard errors
    double raw = 0.0;
    double std_error = 0.0;  ///< of the paired difference; zero for analytic modes
};

struct OracleSummary {
    OracleMode mode;
    std::size_t samples = 0;  ///< m, Monte Carlo only
    std::uint64_t seed = 0;
    Vector w_star;
    double risk_at_w_star = 0.0;
    MinimizerSource source = MinimizerSource::Generating;
    bool approximate = false;
    double gradient_norm_at_w_star = 0.0;
};

/// Population risk, its gradient and the minimizer w_star for one loss and
/// data distribution. Immutable after construction.
class PopulationOracle {
public:
    /// L(w) = (w - w*)^T Sigma (w - w*) + noise_sd^2, gradient 2 Sigma (w - w*).
    static PopulationOracle analytic_squared(const SyntheticModel& model, const LossModel& loss);

    /// For losses of the residual y - a (squared, logistic regression) under the
    /// Gaussian model: the residual is N(0, noise_sd^2 + q) with
    /// q = (w - w*)^T Sigma (w - w*), so L and grad L reduce to 1-d Gaussian
    /// expectations (grad L = Sigma (w - w*) E[l''] by Stein's identity).
    static PopulationOracle gaussian_quadrature(const SyntheticModel& model, const LossModel& loss,
                                                int nodes = 128);

    /// Holdout sample of size m drawn from the model with a seed derived from
    /// `seed` under its own stream tag, so it never coincides with training draws.
    static PopulationOracle monte_carlo(const SyntheticModel& model, const LossModel& loss,
                                        std::size_t m, std::uint64_t seed);

    /// Monte Carlo over an explicit sample. w_star is located numerically when
    /// not supplied.
    static PopulationOracle from_sample(Dataset sample, const LossModel& loss,
                                        std::optional<Vector> w_star = std::nullopt);

    OracleMode mode() const { return mode_; }
    const Vector& w_star() const { return w_star_; }
    const LossModel& loss() const { return loss_; }
    std::size_t dimension() const { return static_cast<std::size_t>(w_star_.size()); }
    /// The Monte Carlo sample; empty for analytic modes.
    const std::optional<Dataset>& holdout() const { return holdout_; }
    OracleSummary summary() const;

    RiskEstimate risk(const Vector& w) const;
    GradientEstimate gradient(const Vector& w) const;
    ExcessRisk excess_risk(const Vector& w) const;

private:
    PopulationOracle(OracleMode mode, LossModel loss) : mode_(mode), loss_(loss) {}
    void check(const Vector& w) const;
    void locate_minimizer();
    double quadrature_mean(double scale, bool second_derivative) const;

    OracleMode mode_;
    LossModel loss_;
    Vector w_star_;
    MinimizerSource source_ = MinimizerSource::Generating;
    std::uint64_t seed_ = 0;

    // analytic modes
    Vector sigma_diag_;
    double noise_var_ = 0.0;
    std::vector<double> nodes_;
    std::vector<double> weights_;

    // Monte Carlo
    std::optional<Dataset> holdout_;
    Vector loss_at_w_star_;
};

double population_risk(const PopulationOracle& oracle, const Vector& w);
Vector population_gradient(const PopulationOracle& oracle, const Vector& w);
double excess_risk(const PopulationOracle& oracle, const Vector& w);

/// e(w) = grad L_hat(w) - grad L(w)
Vector gradient_noise(const PopulationOracle& oracle, const LossModel& loss, const Dataset& data,
                      const Vector& w);

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1) (Golub-Welsch, weights sum to 1).
void gauss_hermite_rule(int nodes, std::vector<double>& points, std::vector<double>& weights);

}  // namespace implreg
