#include "doctest.h"

#include <cmath>

#include "implreg/analysis.hpp"
#include "implreg/concentration.hpp"
#include "implreg/rng.hpp"

using namespace implreg;

namespace {

Dataset small_sample(std::size_t n, std::uint64_t seed) { return sample(make_reference_model(4), n, seed); }

// E over all sign vectors of (R/n) |sum_j eps_j x_j| with plain loops.
double scalar_enumeration(const Dataset& data, double R) {
    const std::size_t n = data.n(), d = data.d();
    double total = 0;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        double sq = 0;
        for (std::size_t k = 0; k < d; ++k) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += ((mask >> j) & 1 ? -1.0 : 1.0) * data.xs(j, k);
            sq += s * s;
        }
        total += R / n * std::sqrt(sq);
    }
    return total / static_cast<double>(1ULL << n);
}

}  // namespace

TEST_CASE("scalar class on one point") {
    Matrix xs(1, 2);
    xs << 1, 0;
    const Dataset data = make_dataset(xs, Vector::Ones(1));
    CHECK(rademacher_scalar(data, 2.0, SignMethod::exhaustive()).value == 2.0);
    const auto mc = rademacher_scalar(data, 2.0, SignMethod::monte_carlo(500, 1));
    CHECK(mc.value == 2.0);
    CHECK(mc.std_error == 0.0);
}

TEST_CASE("scalar enumeration against direct loops and the bound") {
    const Dataset data = small_sample(10, 3);
    const double R = 2.5;
    const auto ex = rademacher_scalar(data, R, SignMethod::exhaustive());
    CHECK(ex.std_error == 0.0);
    CHECK(ex.value == doctest::Approx(scalar_enumeration(data, R)).epsilon(1e-13));
    CHECK(ex.value <= rademacher_bounds(data.kappa, 1, 1, R, data.n()).scalar);
    const auto mc = rademacher_scalar(data, R, SignMethod::monte_carlo(10000, 4));
    CHECK(mc.std_error > 0.0);
    CHECK(std::fabs(mc.value - ex.value) <= 3 * mc.std_error);
    CHECK(mc.value <= rademacher_bounds(data.kappa, 1, 1, R, data.n()).scalar + 3 * mc.std_error);
}

TEST_CASE("scalar estimate is linear in the radius") {
    const Dataset data = small_sample(9, 5);
    for (const auto& m : {SignMethod::exhaustive(), SignMethod::monte_carlo(300, 2)})
        CHECK(rademacher_scalar(data, 3.0, m).value == 2.0 * rademacher_scalar(data, 1.5, m).value);
}

TEST_CASE("exhaustive enumeration is refused above the limit") {
    const Dataset data = small_sample(21, 1);
    CHECK_THROWS_AS(rademacher_scalar(data, 1, SignMethod::exhaustive()), std::invalid_argument);
    const LossModel loss(LossKind::LogisticRegression, data.kappa, 1);
    CHECK_THROWS_AS(rademacher_gradient(loss, data, 1, SignMethod::exhaustive()), std::invalid_argument);
    CHECK_NOTHROW(rademacher_scalar(small_sample(20, 1), 1, SignMethod::monte_carlo(10, 1)));
}

TEST_CASE("one-sample squared loss supremum has a closed form") {
    // sup_{|v| <= R} |2 (<x, v> - y) x| = 2 (R |x| + |y|) |x|
    Rng rng(9);
    for (int k = 0; k < 10; ++k) {
        Matrix xs(1, 3);
        for (int i = 0; i < 3; ++i) xs(0, i) = rng.uniform(-1, 1);
        Vector ys(1);
        ys[0] = rng.uniform(-2, 2);
        const Dataset data = make_dataset(xs, ys);
        const double R = rng.uniform(0.5, 3);
        const LossModel loss(LossKind::Squared, data.kappa, R, 2.0);
        const double nx = xs.row(0).norm();
        const double exact = 2 * (R * nx + std::fabs(ys[0])) * nx;
        const double probed = gradient_class_supremum(derivatives_of(loss), data, R, {1});
        CHECK(probed <= exact * (1 + 1e-12));
        CHECK(probed >= 0.99 * exact);
    }
}

TEST_CASE("gradient class: enumeration, Monte Carlo and the bound") {
    const Dataset data = small_sample(12, 6);
    const double R = path_radius(make_reference_model(4).w_star);
    for (auto kind : {LossKind::LogisticRegression, LossKind::Squared}) {
        const LossModel loss(kind, data.kappa, R, data.label_bound());
        const auto ex = rademacher_gradient(loss, data, R, SignMethod::exhaustive());
        const auto mc = rademacher_gradient(loss, data, R, SignMethod::monte_carlo(10000, 7));
        const double bound = rademacher_bounds(data.kappa, loss.lipschitz(), loss.smoothness(), R, data.n()).gradient;
        CHECK(ex.std_error == 0.0);
        CHECK(std::fabs(mc.value - ex.value) <= 3 * mc.std_error);
        CHECK(ex.value <= bound);
        CHECK(mc.value <= bound + 3 * mc.std_error);
    }
}

TEST_CASE("linear loss collapses the gradient class") {
    const Dataset data = small_sample(11, 8);
    const double L = 1.7;
    const LossDerivatives linear{[L](double, double) { return L; }, [](double, double) { return 0.0; }};
    const auto ex = rademacher_gradient(linear, data, 2.0, SignMethod::exhaustive());
    CHECK(ex.value == doctest::Approx(L * scalar_enumeration(data, 1.0)).epsilon(1e-13));
}

TEST_CASE("gradient estimate is nondecreasing in the radius") {
    const Dataset data = small_sample(8, 10);
    const LossModel loss(LossKind::LogisticRegression, data.kappa, 4.0);
    double previous = 0;
    for (double R : {0.5, 1.0, 2.0, 4.0}) {
        const double v = rademacher_gradient(loss, data, R, SignMethod::exhaustive()).value;
        CHECK(v >= previous - 1e-9);
        previous = v;
    }
}

TEST_CASE("closed-form complexity bounds") {
    CHECK(rademacher_bounds(1, 1, 1, 1, 100).scalar == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(rademacher_bounds(1, 1, 1, 1, 8).gradient == doctest::Approx(2.0).epsilon(1e-15));
    const auto a = rademacher_bounds(2, 3, 1.5, 2, 100), b = rademacher_bounds(2, 3, 1.5, 2, 400);
    CHECK(a.scalar == doctest::Approx(2 * b.scalar));
    CHECK(a.gradient == doctest::Approx(2 * b.gradient));
}

TEST_CASE("concentration bound") {
    const auto b = concentration_bound_log(1, 1, 1, 1, 1600, 1.0);
    CHECK(b.simplified == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(b.sup_bound == 1.0);
    CHECK(b.valid);
    CHECK(concentration_bound_log(1, 1, 1, 1, 6400, 1.0).simplified == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_FALSE(concentration_bound_log(1, 1, 1, 1, 2, 3.0).valid);

    double worst = -1e300;
    for (double kappa : {1.0, 2.5})
        for (double R : {1.0, 3.0})
            for (std::size_t n : {3, 10, 100, 1000, 100000})
                for (double delta : {1e-6, 1e-3, 0.05, 0.5, 1.0}) {
                    const auto c = concentration_bound(kappa, 2.0, 1.0, R, n, delta);
                    if (c.valid) worst = std::max(worst, c.raw - c.simplified);
                }
    CHECK(worst <= 0.0);
}

TEST_CASE("empirical sup noise") {
    const auto model = make_reference_model(5);
    const Dataset data = sample(model, 400, 11);
    const double R = path_radius(model.w_star);
    const LossModel loss(LossKind::Squared, data.kappa, R, data.label_bound());
    const auto self = PopulationOracle::from_sample(data, loss, model.w_star);
    CHECK(empirical_sup_noise(loss, data, self, R, ProbeSet{}) <= 1e-13);

    const auto oracle = PopulationOracle::analytic_squared(model, loss);
    ProbeSet path_only;
    path_only.ball_points = 0;
    path_only.sphere_points = 0;
    const auto path = run(loss, data, DescentConfig{0.05, 50, std::nullopt});
    path_only.extra = path.iterates;
    ProbeSet both = path_only;
    both.ball_points = 64;
    both.sphere_points = 64;
    const double a = empirical_sup_noise(loss, data, oracle, R, path_only);
    const double b = empirical_sup_noise(loss, data, oracle, R, both);
    CHECK(a > 0);
    CHECK(b >= a);

    // Generic path agrees with the quadratic shortcut.
    const LossModel logistic(LossKind::LogisticRegression, data.kappa, R);
    const auto quad = PopulationOracle::gaussian_quadrature(model, logistic);
    CHECK(empirical_sup_noise(logistic, data, quad, R, ProbeSet{}) > 0);
}
