#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>

#include "eot/costs.hpp"
#include "test_support.hpp"

using namespace eot;

namespace {

// Truncated Poisson(1): masses e^{-1}/n! for n = 0..24; the dropped tail is
// ~4e-26, far below the weight tolerance.
SourceLaw truncated_poisson() {
    std::vector<double> pts, probs;
    double fact = 1.0;
    for (int n = 0; n < 25; ++n) {
        if (n > 0) fact *= n;
        pts.push_back(double(n));
        probs.push_back(std::exp(-1.0) / fact);
    }
    return SourceLaw::finite_support(pts, probs);
}

double eval1(const SourceLaw& law, double v, CramerMode mode = CramerMode::closed_form) {
    const double vec[1] = {v};
    return mode == CramerMode::closed_form ? cramer_closed(law, vec) : cramer_numerical(law, vec);
}

}  // namespace

TEST_CASE("log laplace closed forms") {
    const SourceLaw normal2 = SourceLaw::standard_normal(2);
    const double z0[2] = {0.0, 0.0};
    CHECK(log_laplace(normal2, z0) == 0.0);
    const double z1[2] = {1.0, 2.0};
    CHECK(log_laplace(normal2, z1) == doctest::Approx(2.5).epsilon(1e-15));

    const SourceLaw poisson = SourceLaw::poisson1();
    const double zlog2[1] = {std::log(2.0)};
    CHECK(log_laplace(poisson, zlog2) == doctest::Approx(1.0).epsilon(1e-14));
    // cross-check against a finite-support truncation
    CHECK(log_laplace(truncated_poisson(), zlog2) == doctest::Approx(1.0).epsilon(1e-9));

    const SourceLaw expo = SourceLaw::exponential1();
    const double zb[1] = {1.0};
    CHECK(log_laplace(expo, zb) == kInf);
    const double zi[1] = {0.5};
    CHECK(log_laplace(expo, zi) == doctest::Approx(-std::log(0.5)).epsilon(1e-14));

    const SourceLaw rad = SourceLaw::rademacher();
    const double zr[1] = {2.0};
    CHECK(log_laplace(rad, zr) == doctest::Approx(std::log(std::cosh(2.0))).epsilon(1e-14));
}

TEST_CASE("cramer catalog values") {
    const SourceLaw normal2 = SourceLaw::standard_normal(2);
    const double v11[2] = {1.0, 1.0};
    CHECK(cramer_closed(normal2, v11) == doctest::Approx(1.0).epsilon(1e-15));

    const SourceLaw expo = SourceLaw::exponential1();
    CHECK(eval1(expo, 1.0) == 0.0);
    CHECK(eval1(expo, 2.0) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-14));
    CHECK(eval1(expo, 0.0) == kInf);
    CHECK(eval1(expo, -1.0) == kInf);

    const SourceLaw poisson = SourceLaw::poisson1();
    CHECK(eval1(poisson, 0.0) == 1.0);
    CHECK(eval1(poisson, 1.0) == 0.0);
    CHECK(eval1(poisson, -0.5) == kInf);

    const SourceLaw rad = SourceLaw::rademacher();
    CHECK(eval1(rad, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(eval1(rad, -1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(eval1(rad, 2.0) == kInf);
    CHECK(eval1(rad, 0.0) == 0.0);
}

TEST_CASE("cramer vanishes exactly at the mean") {
    std::mt19937_64 rng(23);
    std::vector<SourceLaw> laws{SourceLaw::standard_normal(1), SourceLaw::rademacher(),
                                SourceLaw::exponential1(), SourceLaw::poisson1()};
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_real_distribution<double> unif(-2.0, 2.0);
        std::vector<double> pts;
        for (int i = 0; i < 4; ++i) pts.push_back(unif(rng) + 5.0 * i);
        laws.push_back(SourceLaw::finite_support(pts, test::random_prob_vector(rng, 4)));
    }
    for (const auto& law : laws) {
        const double mean = law.mean()[0];
        for (CramerMode mode : {CramerMode::closed_form, CramerMode::numerical}) {
            CHECK(eval1(law, mean, mode) <= 1e-12);
            CHECK(eval1(law, mean + 0.05, mode) > 0.0);
            CHECK(eval1(law, mean - 0.05, mode) >= 0.0);
            if (law.v_min() < mean - 0.05) CHECK(eval1(law, mean - 0.05, mode) > 0.0);
        }
    }
}

TEST_CASE("closed vs numerical conjugate on interior grids") {
    struct GridCase {
        SourceLaw law;
        double lo, hi;
    };
    const GridCase cases[] = {
        {SourceLaw::standard_normal(1), -5.0, 5.0},
        {SourceLaw::rademacher(), -0.99, 0.99},
        {SourceLaw::exponential1(), 0.05, 8.0},
        {SourceLaw::poisson1(), 0.05, 8.0},
    };
    for (const auto& c : cases) {
        double max_err = 0.0;
        for (int i = 0; i < 101; ++i) {
            const double v = c.lo + (c.hi - c.lo) * i / 100.0;
            max_err = std::max(max_err, std::abs(eval1(c.law, v, CramerMode::closed_form) -
                                                 eval1(c.law, v, CramerMode::numerical)));
        }
        CHECK(max_err <= 1e-6);
    }

    // numerical route in two dimensions stays separable
    const SourceLaw normal2 = SourceLaw::standard_normal(2);
    const double v[2] = {0.7, -1.3};
    CHECK(cramer_numerical(normal2, v) ==
          doctest::Approx(cramer_closed(normal2, v)).epsilon(1e-10));
}

TEST_CASE("convexity and fenchel-young on random data") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> lam(0.05, 0.95);
    const SourceLaw laws[] = {SourceLaw::standard_normal(1), SourceLaw::rademacher(),
                              SourceLaw::exponential1(), SourceLaw::poisson1()};
    for (const auto& law : laws) {
        std::uniform_real_distribution<double> vel(law.v_min() == -kInf ? -4.0 : law.v_min() + 0.01,
                                                   law.v_max() == kInf ? 4.0 : law.v_max() - 0.01);
        for (int trial = 0; trial < 100; ++trial) {
            const double v1 = vel(rng), v2 = vel(rng), l = lam(rng);
            const double lhs = eval1(law, l * v1 + (1.0 - l) * v2);
            const double rhs = l * eval1(law, v1) + (1.0 - l) * eval1(law, v2);
            CHECK(lhs <= rhs + 1e-9);

            // zeta . v <= log_laplace(zeta) + cramer(v)
            std::uniform_real_distribution<double> zdist(-3.0, law.kind() == LawKind::exponential1
                                                                   ? 0.95
                                                                   : 3.0);
            const double zeta = zdist(rng);
            const double zv[1] = {zeta};
            CHECK(zeta * v1 <= log_laplace(law, zv) + eval1(law, v1) + 1e-9);
        }
    }
}

TEST_CASE("finite support effective domain") {
    std::mt19937_64 rng(31);
    const SourceLaw law = SourceLaw::finite_support({-2.0, 0.5, 3.0}, {0.25, 0.5, 0.25});
    CHECK(eval1(law, -2.5, CramerMode::numerical) == kInf);
    CHECK(eval1(law, 3.5, CramerMode::numerical) == kInf);
    CHECK(eval1(law, -2.0, CramerMode::numerical) == doctest::Approx(-std::log(0.25)));
    CHECK(eval1(law, 3.0, CramerMode::numerical) == doctest::Approx(-std::log(0.25)));
    std::uniform_real_distribution<double> inner(-1.99, 2.99);
    for (int trial = 0; trial < 50; ++trial) {
        const double v = inner(rng);
        const double c = eval1(law, v, CramerMode::numerical);
        CHECK(std::isfinite(c));
        CHECK(c >= 0.0);
    }
    // single atom: zero at the atom, infinite elsewhere
    const SourceLaw atom = SourceLaw::finite_support({1.5}, {1.0});
    CHECK(eval1(atom, 1.5, CramerMode::numerical) == 0.0);
    CHECK(eval1(atom, 1.6, CramerMode::numerical) == kInf);
}

TEST_CASE("affine transport") {
    const CramerTransform ct(SourceLaw::standard_normal(2));

    Matrix id(2, 2);
    id(0, 0) = id(1, 1) = 1.0;
    const double b0[2] = {0.0, 0.0};
    const double v[2] = {1.0, 2.0};
    CHECK(affine_transport(ct, id, b0, v) == doctest::Approx(ct(v)).epsilon(1e-14));

    Matrix two(2, 2);
    two(0, 0) = two(1, 1) = 2.0;
    const double v20[2] = {2.0, 0.0};
    CHECK(affine_transport(ct, two, b0, v20) == doctest::Approx(0.5).epsilon(1e-14));

    // shifting the law relocates the minimum
    const double shift[2] = {0.7, -0.2};
    CHECK(affine_transport(ct, id, shift, shift) == doctest::Approx(0.0).epsilon(1e-14));

    Matrix singular(2, 2);
    singular(0, 0) = 1.0;
    singular(0, 1) = 2.0;
    singular(1, 0) = 2.0;
    singular(1, 1) = 4.0;
    CHECK_THROWS(affine_transport(ct, singular, b0, v));
}

TEST_CASE("power twist inversion and cost") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (double p : {0.7, 1.5, 2.0, 3.0}) {
        const Twist tw = Twist::power(p);
        for (int trial = 0; trial < 50; ++trial) {
            const Point v{unif(rng), unif(rng)};
            const auto round_trip = tw.inverse(*tw.forward(v));
            REQUIRE(round_trip.has_value());
            CHECK(distance(*round_trip, v) <= 1e-9);
        }
        // beta(0) = 0
        const auto z = tw.inverse(Point{0.0, 0.0});
        CHECK(norm(*z) == 0.0);
    }

    const CramerTransform normal(SourceLaw::standard_normal(2));
    const Twist t2 = Twist::power(2.0);
    CHECK(twisted_cost(normal, t2, Point{0.0, 0.0}, Point{1.0, 0.0}) ==
          doctest::Approx(1.0).epsilon(1e-14));
    const Twist t15 = Twist::power(1.5);
    for (int trial = 0; trial < 50; ++trial) {
        const Point x{unif(rng), unif(rng)}, y{unif(rng), unif(rng)};
        CHECK(twisted_cost(normal, t15, x, y) ==
              doctest::Approx(std::pow(distance(x, y), 1.5)).epsilon(1e-12));
    }

    // identity twist reduces to the plain shift cost
    const Twist id = Twist::identity();
    const Point x{0.3, -0.4}, y{1.1, 0.9};
    CHECK(twisted_cost(normal, id, x, y) == doctest::Approx(normal(y - x)).epsilon(1e-14));
}

TEST_CASE("cost matrices") {
    // half-quadratic shift cost on the canonical supports
    const CostFunction half_quad =
        CostFunction::cramer_shift(CramerTransform(SourceLaw::standard_normal(1)));
    const std::vector<Point> src{Point{0.0}, Point{1.0}};
    const std::vector<Point> tgt{Point{2.0}, Point{3.0}};
    const Matrix m = cost_matrix(half_quad, src, tgt);
    CHECK(m(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(m(0, 1) == doctest::Approx(4.5).epsilon(1e-15));
    CHECK(m(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m(1, 1) == doctest::Approx(2.0).epsilon(1e-15));

    // diagonal of any analytic cost with src == tgt
    const Matrix d = cost_matrix(CostFunction::power(1.5), src, src);
    CHECK(d(0, 0) == 0.0);
    CHECK(d(1, 1) == 0.0);

    // infinite entries are preserved
    const CostFunction rad_shift =
        CostFunction::cramer_shift(CramerTransform(SourceLaw::rademacher()));
    const std::vector<Point> s0{Point{0.0}}, t3{Point{3.0}};
    const Matrix inf_m = cost_matrix(rad_shift, s0, t3);
    CHECK(inf_m(0, 0) == kInf);
}

TEST_CASE("cost specs and csv tables") {
    const auto tmp = std::filesystem::temp_directory_path() / "eot_cost_spec_test";
    std::filesystem::create_directories(tmp);
    {
        std::ofstream out(tmp / "costs.csv");
        out << "0.0, 1.5\ninf, 0.25\n";
    }

    const CostFunction table =
        cost_from_spec({{"kind", "table"}, {"path", "costs.csv"}}, tmp);
    const std::vector<Point> src{Point{0.0}, Point{1.0}};
    const std::vector<Point> tgt{Point{5.0}, Point{6.0}};
    const Matrix m = cost_matrix(table, src, tgt);
    CHECK(m(0, 1) == 1.5);
    CHECK(m(1, 0) == kInf);
    CHECK(m(1, 1) == 0.25);
    const std::vector<Point> narrow{Point{5.0}};
    CHECK_THROWS(cost_matrix(table, src, narrow));

    const CostFunction power = cost_from_spec({{"kind", "power"}, {"p", 2.0}}, tmp);
    CHECK(power(Point{0.0}, Point{3.0}) == doctest::Approx(9.0));

    const CostFunction cramer = cost_from_spec({{"kind", "cramer"}, {"law", "exponential1"}}, tmp);
    CHECK(cramer(Point{0.0}, Point{1.0}) == 0.0);

    const CostFunction twisted =
        cost_from_spec({{"kind", "twisted"}, {"law", "normal"}, {"power_p", 1.5}}, tmp);
    CHECK(twisted(Point{0.0}, Point{2.0}) == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-12));

    const CostFunction fin = cost_from_spec(
        {{"kind", "cramer"}, {"law", "finite"}, {"points", {-1.0, 1.0}}, {"probs", {0.5, 0.5}}},
        tmp);
    CHECK(fin(Point{0.0}, Point{1.0}) == doctest::Approx(std::log(2.0)));

    CHECK_THROWS(cost_from_spec({{"kind", "nope"}}, tmp));
    CHECK_THROWS(cost_from_spec({{"kind", "cramer"}, {"law", "nope"}}, tmp));
}
