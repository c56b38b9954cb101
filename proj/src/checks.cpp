#include "implreg/checks.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "implreg/analysis.hpp"
#include "implreg/concentration.hpp"
#include "implreg/engine.hpp"
#include "implreg/experiments.hpp"
#include "implreg/rng.hpp"

namespace implreg {

namespace {

void loss_checks(const VerifyOptions& opt, std::vector<CheckResult>& out) {
    Rng rng(derive_seed(opt.seed, "verify-losses"));
    for (auto kind : {LossKind::Squared, LossKind::LogisticRegression,
                      LossKind::LogisticClassification, LossKind::Exponential}) {
        const LossModel loss(kind, 2.0, 1.5, 2.0);
        for (const auto& c : {check_derivative_consistency(loss, rng, opt.loss_samples),
                              check_lipschitz(loss, rng, opt.loss_samples),
                              check_smoothness(loss, rng, opt.loss_samples),
                              check_convexity(loss, rng, opt.loss_samples),
                              check_quadratic_upper_bound(loss, rng, opt.loss_samples),
                              check_nonnegative(loss, rng, opt.loss_samples)})
            out.push_back({fmt::format("loss {}", c.name), c.passed,
                           fmt::format("worst {:.3g} (tol {:.1g}, {} samples)", c.worst, c.tolerance, c.samples)});
    }
}

void identity_check(const VerifyOptions& opt, std::vector<CheckResult>& out) {
    Rng rng(derive_seed(opt.seed, "verify-identity"));
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const int T = 1 + static_cast<int>(rng.uniform() * 1000.0);
        std::vector<double> q(static_cast<std::size_t>(T));
        for (auto& v : q) v = rng.uniform(-5.0, 5.0);
        const auto sides = last_iterate_identity(q);
        worst = std::max(worst, std::fabs(sides.lhs - sides.rhs));
    }
    out.push_back({"last-iterate identity", worst <= 1e-10, fmt::format("max |lhs - rhs| = {:.3g}", worst)});
}

struct Setup {
    const char* name;
    LossKind loss;
    OracleMode oracle;
};

void descent_checks(const VerifyOptions& opt, std::vector<CheckResult>& out) {
    for (const Setup& s : {Setup{"squared", LossKind::Squared, OracleMode::AnalyticSquared},
                           Setup{"logistic_regression", LossKind::LogisticRegression,
                                 OracleMode::GaussianQuadrature}}) {
        const SyntheticModel model = make_reference_model(20);
        const Dataset data = sample(model, 200, derive_seed(opt.seed, "verify-descent"));
        const double R = path_radius(model.w_star);
        const LossModel loss(s.loss, data.kappa, R, data.label_bound());
        const PopulationOracle oracle = s.oracle == OracleMode::AnalyticSquared
                                            ? PopulationOracle::analytic_squared(model, loss)
                                            : PopulationOracle::gaussian_quadrature(model, loss);
        const double gamma = std::min(1.0, 1.0 / (data.kappa * data.kappa * loss.smoothness()));
        const DescentPath path = run(loss, data, DescentConfig{gamma, 300, std::nullopt});
        const OracleTrace trace = trace_oracle(oracle, path);

        double worst41 = -INFINITY, worst42 = -INFINITY;
        bool ok41 = true, ok42 = true;
        for (const auto& r : risk_step_residuals(loss, data, oracle, path, trace, oracle.w_star())) {
            worst41 = std::max(worst41, r.value);
            ok41 = ok41 && r.holds() && r.precondition_ok;
        }
        for (const auto& r : path_recursion_residuals(loss, data, oracle, path, trace)) {
            worst42 = std::max(worst42, r.value);
            ok42 = ok42 && r.holds() && r.precondition_ok;
        }
        out.push_back({fmt::format("risk step inequality ({})", s.name), ok41,
                       fmt::format("max residual {:.3g}, gamma {:.4g}", worst41, gamma)});
        out.push_back({fmt::format("path recursion ({})", s.name), ok42,
                       fmt::format("max residual {:.3g}", worst42)});

        const DecompositionReport rep = decompose(loss, data, oracle, path, oracle.w_star());
        out.push_back({fmt::format("decomposition averaged ({})", s.name), rep.averaged_holds(),
                       fmt::format("{:.4g} <= {:.4g} <= {:.4g}", rep.lhs_avg, rep.mean_risk_gap, rep.rhs_avg)});
        out.push_back({fmt::format("decomposition last iterate ({})", s.name), rep.last_holds(),
                       fmt::format("{:.4g} <= {:.4g}", rep.lhs_last, rep.rhs_last)});
    }
}

// A sign flip in the noise terms must break the decomposition somewhere.
void mutation_check(const VerifyOptions& opt, std::vector<CheckResult>& out) {
    const SyntheticModel model = make_reference_model(20);
    int caught = 0;
    const int seeds = 5;
    for (int k = 0; k < seeds; ++k) {
        const Dataset data = sample(model, 20, derive_seed(opt.seed, "verify-mutation", static_cast<std::uint64_t>(k)));
        const LossModel loss(LossKind::Squared, data.kappa, path_radius(model.w_star), data.label_bound());
        const PopulationOracle oracle = PopulationOracle::analytic_squared(model, loss);
        const double gamma = 1.0 / (data.kappa * data.kappa * loss.smoothness());
        const DescentPath path = run(loss, data, DescentConfig{gamma, 2000, std::nullopt});
        DecomposeOptions mutated;
        mutated.variance_sign = -1.0;
        const auto rep = decompose(loss, data, oracle, path, oracle.w_star(), mutated);
        caught += !(rep.averaged_holds() && rep.last_holds());
    }
    out.push_back({"sign-flip mutation detected", caught == seeds,
                   fmt::format("{} of {} mutated runs rejected", caught, seeds)});
}

void rademacher_checks(const VerifyOptions& opt, std::vector<CheckResult>& out) {
    const SyntheticModel model = make_reference_model(5);
    const Dataset data = sample(model, 8, derive_seed(opt.seed, "verify-rademacher"));
    const double R = path_radius(model.w_star);
    const LossModel loss(LossKind::LogisticRegression, data.kappa, R);
    const auto bounds = rademacher_bounds(data.kappa, loss.lipschitz(), loss.smoothness(), R, data.n());
    const auto mc = SignMethod::monte_carlo(4000, derive_seed(opt.seed, "verify-signs"));
    ProbeOptions probes;
    probes.directions = 128;
    probes.ascents = 8;

    const auto se = rademacher_scalar(data, R, SignMethod::exhaustive());
    const auto sm = rademacher_scalar(data, R, mc);
    out.push_back({"scalar class enumeration vs Monte Carlo",
                   std::fabs(se.value - sm.value) <= 3.0 * sm.std_error && se.value <= bounds.scalar &&
                       sm.value <= bounds.scalar + 3.0 * sm.std_error,
                   fmt::format("{:.5g} vs {:.5g} +- {:.2g}, bound {:.4g}", se.value, sm.value, sm.std_error,
                               bounds.scalar)});

    const auto ge = rademacher_gradient(loss, data, R, SignMethod::exhaustive(), probes);
    const auto gm = rademacher_gradient(loss, data, R, mc, probes);
    out.push_back({"gradient class enumeration vs Monte Carlo",
                   std::fabs(ge.value - gm.value) <= 3.0 * gm.std_error && ge.value <= bounds.gradient &&
                       gm.value <= bounds.gradient + 3.0 * gm.std_error,
                   fmt::format("{:.5g} vs {:.5g} +- {:.2g}, bound {:.4g}", ge.value, gm.value, gm.std_error,
                               bounds.gradient)});

    const double slope = 0.7;
    const LossDerivatives linear{[slope](double, double) { return slope; }, [](double, double) { return 0.0; }};
    const auto lin = rademacher_gradient(linear, data, R, SignMethod::exhaustive(), probes);
    const auto unit = rademacher_scalar(data, 1.0, SignMethod::exhaustive());
    const double gap = std::fabs(lin.value - slope * unit.value);
    out.push_back({"linear loss collapses to fixed vectors", gap <= 1e-12 * std::max(1.0, lin.value),
                   fmt::format("|difference| = {:.3g}", gap)});

    double worst = -INFINITY;
    for (std::size_t n : {10, 100, 1000, 10000, 100000})
        for (double delta : {1e-4, 1e-2, 0.05, 0.5, 1.0}) {
            const auto b = concentration_bound(data.kappa, loss.lipschitz(), loss.smoothness(), R, n, delta);
            if (b.valid) worst = std::max(worst, b.raw - b.simplified);
        }
    out.push_back({"simplified concentration bound dominates", worst <= 0.0,
                   fmt::format("max raw - simplified = {:.3g}", worst)});
}

void determinism_check(const VerifyOptions& opt, std::vector<CheckResult>& out) {
    ExperimentConfig c = default_config(Command::GridExperiment);
    c.d = 10;
    c.n_train = 100;
    c.repetitions = 3;
    c.gammas = {2.0, 4.0};
    c.Ts = {1, 5, 10};
    c.seed = opt.seed;
    const GridResult a = grid_cells(c);
    c.jobs = 2;
    const GridResult b = grid_cells(c);
    bool same = a.cells.size() == b.cells.size();
    for (std::size_t i = 0; same && i < a.cells.size(); ++i)
        same = a.cells[i].mean_excess == b.cells[i].mean_excess && a.cells[i].sd == b.cells[i].sd &&
               a.cells[i].mean_test_excess == b.cells[i].mean_test_excess;
    out.push_back({"grid runs reproducible across job counts", same, fmt::format("{} cells", a.cells.size())});
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const VerifyOptions& options) {
    std::vector<CheckResult> out;
    loss_checks(options, out);
    identity_check(options, out);
    descent_checks(options, out);
    mutation_check(options, out);
    rademacher_checks(options, out);
    determinism_check(options, out);
    return out;
}

std::string format_table(const std::vector<CheckResult>& results) {
    std::size_t width = 5;
    for (const auto& r : results) width = std::max(width, r.name.size());
    std::string out = fmt::format("{:<{}}  {:<6}  {}\n", "check", width, "result", "detail");
    int failed = 0;
    for (const auto& r : results) {
        out += fmt::format("{:<{}}  {:<6}  {}\n", r.name, width, r.passed ? "PASS" : "FAIL", r.detail);
        failed += !r.passed;
    }
    out += fmt::format("{} checks, {} failed\n", results.size(), failed);
    return out;
}

}  // namespace implreg
