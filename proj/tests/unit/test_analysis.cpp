#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>

#include "implreg/analysis.hpp"
#include "implreg/rng.hpp"

using namespace implreg;

namespace {

// Right-hand side of the last-iterate identity by direct double summation.
long double identity_rhs_direct(const std::vector<double>& q) {
    const std::size_t T = q.size();
    long double mean = 0;
    for (double v : q) mean += v;
    mean /= T;
    long double corr = 0;
    for (std::size_t t = 1; t < T; ++t) {
        long double inner = 0;
        for (std::size_t s = T - t + 1; s <= T; ++s) inner += q[s - 1] - q[T - t - 1];
        corr += inner / (static_cast<long double>(t) * (t + 1));
    }
    return mean + corr;
}

struct Run {
    SyntheticModel model;
    Dataset data;
    LossModel loss;
    PopulationOracle oracle;
    DescentPath path;
};

Run squared_run(std::size_t d, std::size_t n, std::uint64_t seed, double gamma_factor, int T) {
    const SyntheticModel model = make_reference_model(d);
    Dataset data = sample(model, n, seed);
    const LossModel loss(LossKind::Squared, data.kappa, path_radius(model.w_star), data.label_bound());
    auto oracle = PopulationOracle::analytic_squared(model, loss);
    const double gamma = gamma_factor / (data.kappa * data.kappa * loss.smoothness());
    auto path = run(loss, data, DescentConfig{gamma, T, std::nullopt});
    return {model, std::move(data), loss, std::move(oracle), std::move(path)};
}

}  // namespace

TEST_CASE("last-iterate identity on reference sequences") {
    const std::vector<double> q{1, 2, 3};
    const auto s = last_iterate_identity(q);
    CHECK(s.lhs == 3.0);
    CHECK(s.rhs == 3.0);
    const std::vector<double> c(17, 2.5);
    CHECK(last_iterate_identity(c).rhs == 2.5);
    CHECK(last_iterate_identity(std::vector<double>{4.0}).rhs == 4.0);
    CHECK_THROWS(last_iterate_identity(std::vector<double>{}));
}

TEST_CASE("last-iterate identity against direct summation") {
    Rng rng(21);
    double worst = 0, worst_direct = 0;
    for (int k = 0; k < 100; ++k) {
        const int T = k < 50 ? 50 : 1 + static_cast<int>(rng.uniform() * 1000);
        std::vector<double> q(T);
        for (auto& v : q) v = rng.uniform(-1000, 1000);
        const auto s = last_iterate_identity(q);
        worst = std::max(worst, std::fabs(s.lhs - s.rhs));
        worst_direct = std::max(worst_direct, std::fabs(s.rhs - static_cast<double>(identity_rhs_direct(q))));
    }
    CHECK(worst <= 1e-10);
    CHECK(worst_direct <= 1e-10);
}

TEST_CASE("last-iterate weights") {
    const auto w = last_iterate_weights(3);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == 0.5);
    CHECK(w[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(last_iterate_weights(1).empty());
}

TEST_CASE("risk step inequality holds at the step-size boundary") {
    const Run r = squared_run(20, 300, 4, 1.0, 200);
    CHECK(step_preconditions(r.loss, r.data, r.path.gamma).smooth_ok);
    const auto trace = trace_oracle(r.oracle, r.path);
    for (const auto& res : risk_step_residuals(r.loss, r.data, r.oracle, r.path, trace, r.oracle.w_star())) {
        CHECK(res.value <= 1e-8);
        CHECK(res.tolerance == kExactTolerance);
    }
    const auto single = check_risk_step(r.loss, r.data, r.oracle, r.path, 17, r.oracle.w_star());
    CHECK(single.value == doctest::Approx(
              risk_step_residuals(r.loss, r.data, r.oracle, r.path, trace, r.oracle.w_star())[16].value));
    CHECK_THROWS_AS(check_risk_step(r.loss, r.data, r.oracle, r.path, 0, r.oracle.w_star()), std::out_of_range);
}

TEST_CASE("risk step inequality with w = v_{t-1} at a small step") {
    const Run r = squared_run(10, 200, 5, 0.01, 30);
    for (int t = 1; t <= 30; ++t) {
        const auto res = check_risk_step(r.loss, r.data, r.oracle, r.path, t, r.path.iterates[t - 1]);
        CHECK(res.value <= 0.0);
    }
}

TEST_CASE("path recursion holds along a long run") {
    const Run r = squared_run(100, 2000, 6, 1.0, 1000);
    const auto res = path_recursion_residuals(r.loss, r.data, r.oracle, r.path, trace_oracle(r.oracle, r.path));
    REQUIRE(res.size() == 1000);
    for (const auto& x : res) {
        CHECK(x.precondition_ok);
        CHECK(x.value <= 1e-8);
    }
}

TEST_CASE("path recursion without gradient noise is a contraction") {
    // d points spanning R^d; the oracle is the training sample itself.
    Matrix xs = Matrix::Identity(4, 4) * 0.9;
    xs(0, 1) = 0.2;
    const Vector ys = Vector::LinSpaced(4, -1, 1);
    const Dataset data = make_dataset(xs, ys);
    const LossModel loss(LossKind::Squared, data.kappa, 3.0, data.label_bound());
    const Vector exact = xs.lu().solve(ys);
    const auto oracle = PopulationOracle::from_sample(data, loss, exact);
    const double gamma = 1.0 / (data.kappa * data.kappa * loss.smoothness());
    const auto path = run(loss, data, DescentConfig{gamma, 100, std::nullopt});
    const double start = (path.iterates[0] - oracle.w_star()).norm();
    for (const auto& v : path.iterates) CHECK((v - oracle.w_star()).norm() <= start + 1e-12);
    for (const auto& x : path_recursion_residuals(loss, data, oracle, path, trace_oracle(oracle, path)))
        CHECK(x.holds());
}

TEST_CASE("path recursion with a Monte Carlo oracle for classification") {
    auto model = make_reference_model(5);
    model.labels = LabelKind::Sign;
    const Dataset data = sample(model, 500, 31);
    const double R = path_radius(model.w_star);
    const LossModel loss(LossKind::LogisticClassification, data.kappa, R);
    const auto oracle = PopulationOracle::monte_carlo(model, loss, 20000, 32);
    const double gamma = std::min(1.0, 1.0 / (data.kappa * data.kappa * loss.smoothness()));
    const auto path = run(loss, data, DescentConfig{gamma, 200, std::nullopt});
    for (const auto& x : path_recursion_residuals(loss, data, oracle, path, trace_oracle(oracle, path))) {
        CHECK(x.tolerance > kExactTolerance);
        CHECK(x.holds());
    }
}

TEST_CASE("decomposition without gradient noise reduces to the bias") {
    const auto model = make_reference_model(6);
    const Dataset data = sample(model, 50, 8);
    const LossModel loss(LossKind::Squared, data.kappa, 3.0, data.label_bound());
    const auto oracle = PopulationOracle::from_sample(data, loss);
    const double gamma = 1.0 / (data.kappa * data.kappa * loss.smoothness());
    const auto path = run(loss, data, DescentConfig{gamma, 40, std::nullopt});
    const auto rep = decompose(loss, data, oracle, path, oracle.w_star());
    for (double v : rep.variance_terms) CHECK(std::fabs(v) <= 1e-14);
    CHECK(rep.rhs_avg == doctest::Approx(rep.bias_term).epsilon(1e-12));
    CHECK(rep.lhs_avg <= rep.bias_term + 1e-12);
    CHECK(rep.averaged_holds());
    CHECK(rep.last_holds());
}

TEST_CASE("last-iterate correction matches direct summation") {
    const Run r = squared_run(8, 60, 9, 1.0, 25);
    const auto rep = decompose(r.loss, r.data, r.oracle, r.path, r.oracle.w_star());
    const int T = r.path.T();
    REQUIRE(rep.last_iterate_correction.size() == static_cast<std::size_t>(T - 1));
    for (int t = 1; t < T; ++t) {
        double inner = 0;
        for (int s = T - t + 1; s <= T; ++s) {
            const Vector xi = r.oracle.gradient(r.path.iterates[s - 1]).value - r.path.empirical_gradients[s - 1];
            inner += xi.dot(r.path.iterates[s] - r.path.iterates[T - t]);
        }
        CHECK(rep.last_iterate_correction[t - 1] ==
              doctest::Approx(inner / (static_cast<double>(t) * (t + 1))).epsilon(1e-9).scale(1e-12));
    }
    CHECK(rep.averaged_holds());
    CHECK(rep.last_holds());
}

TEST_CASE("decomposition on the reference design at unit step") {
    const auto model = make_reference_model(100);
    const Dataset data = sample(model, 2000, 1234);
    const LossModel loss(LossKind::Squared, data.kappa, path_radius(model.w_star), data.label_bound());
    const auto oracle = PopulationOracle::analytic_squared(model, loss);
    const auto path = run(loss, data, DescentConfig{1.0, 100, std::nullopt});
    const auto rep = decompose(loss, data, oracle, path, oracle.w_star());
    MESSAGE("averaged margin " << rep.rhs_avg - rep.lhs_avg << ", precondition_ok " << rep.precondition_ok);
    CHECK_FALSE(rep.precondition_ok);
    CHECK(rep.lhs_avg <= rep.rhs_avg);
}

TEST_CASE("sign-flipped noise terms are rejected") {
    const Run r = squared_run(20, 20, 10, 1.0, 2000);
    CHECK(decompose(r.loss, r.data, r.oracle, r.path, r.oracle.w_star()).averaged_holds());
    DecomposeOptions flipped;
    flipped.variance_sign = -1;
    const auto rep = decompose(r.loss, r.data, r.oracle, r.path, r.oracle.w_star(), flipped);
    CHECK_FALSE((rep.averaged_holds() && rep.last_holds()));
}

TEST_CASE("path radius") {
    CHECK(path_radius(Vector::Constant(1, 0.2)) == 1.0);
    CHECK(path_radius(Vector::Constant(1, 1.0)) == 3.0);
    CHECK(path_radius(make_reference_model(100).w_star) == doctest::Approx(3.1210424777788996).epsilon(1e-14));
}

TEST_CASE("bounded path check") {
    const Vector w = Vector::Constant(3, 0.1);
    DescentPath constant;
    constant.gamma = 1;
    constant.iterates = std::vector<Vector>(5, w);
    constant.empirical_gradients = std::vector<Vector>(4, Vector::Zero(3));
    const double R = path_radius(w);
    CHECK(check_bounded_path(constant, w, R).bounded);

    const std::vector<double> norms{0, 0.5, 0.9, 1.2}, dists{0.3, 0.4, 0.7, 0.2};
    const auto res = check_bounded_path(norms, dists, 1.0);
    CHECK_FALSE(res.bounded);
    REQUIRE(res.first_violation.has_value());
    CHECK(*res.first_violation == 2);
}

TEST_CASE("sample-size condition") {
    CHECK(sample_size_condition_log(810000, 2.5, 1, 1, 1, 1.0));
    CHECK_FALSE(sample_size_condition_log(809999, 2.5, 1, 1, 1, 1.0));
    const double delta = 4.0 / std::exp(1.0);
    CHECK(sample_size_condition(810000, 2.5, 1, 1, 1, delta));
    CHECK_FALSE(sample_size_condition(809999, 2.5, 1, 1, 1, delta));
    CHECK(sample_size_condition(2, 1e-12, 1, 1, 1, delta));
    CHECK_FALSE(sample_size_condition_log(1, 1e-12, 1, 1, 1, 1.5));
}

TEST_CASE("gamma T schedule") {
    CHECK(schedule_gamma_T_log(810000, 1, 1, 1, 1.0) == 2.5);
    CHECK(schedule_gamma_T_log(4 * 810000, 1, 1, 1, 1.0) == 5.0);
    CHECK(schedule_gamma_T(810000, 1, 1, 1, 4.0 / std::exp(1.0)) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("excess risk bounds") {
    const auto b = excess_risk_bounds_log(1000000, 10, 1.0, 1.0, 1.0, 1, 1, 1);
    CHECK(b.averaged == doctest::Approx(0.41).epsilon(1e-14));
    CHECK(b.last == doctest::Approx(0.90).epsilon(1e-14));
    const Vector w = Vector::Constant(1, 1.0);
    const auto at = [&](std::size_t n, double delta) { return excess_risk_bounds(n, 0.1, 100, delta, w, 1, 1, 1).averaged; };
    CHECK(at(1000, 0.05) > at(10000, 0.05));
    CHECK(at(1000, 0.01) > at(1000, 0.05));
    CHECK_THROWS(excess_risk_bounds(1000, 0.1, 2, 0.05, w, 1, 1, 1));
}
