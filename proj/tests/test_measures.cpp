#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "eot/measures.hpp"
#include "test_support.hpp"

using namespace eot;

TEST_CASE("measure validation") {
    CHECK_THROWS(DiscreteMeasure({Point{0.0}, Point{1.0}}, {0.6, 0.6}));
    CHECK_THROWS(DiscreteMeasure({Point{0.0}, Point{1.0}}, {-0.1, 1.1}));
    CHECK_THROWS(DiscreteMeasure({Point{0.0}, Point{0.0}}, {0.5, 0.5}));
    CHECK_THROWS(DiscreteMeasure({Point{0.0}, Point{1.0, 2.0}}, {0.5, 0.5}));
    // drift below the tolerance is accepted
    CHECK_NOTHROW(DiscreteMeasure({Point{0.0}, Point{1.0}}, {0.5, 0.5 + 5e-13}));
    // drift above is an input error, not repaired
    CHECK_THROWS(DiscreteMeasure({Point{0.0}, Point{1.0}}, {0.5, 0.5 + 1e-10}));

    // point identity ignores digits beyond the 12th
    CHECK_THROWS(DiscreteMeasure({Point{1.0}, Point{1.0 + 1e-13}}, {0.5, 0.5}));
    CHECK_NOTHROW(DiscreteMeasure({Point{1.0}, Point{1.0 + 1e-10}}, {0.5, 0.5}));
}

TEST_CASE("marginals of products and hand matrices") {
    const DiscreteMeasure p({Point{0.0}, Point{1.0}}, {0.3, 0.7});
    const DiscreteMeasure q({Point{2.0}, Point{3.0}, Point{4.0}}, {0.2, 0.3, 0.5});
    const Coupling prod = Coupling::product(p, q);

    const DiscreteMeasure src = marginal(prod, MarginalSide::source);
    const DiscreteMeasure tgt = marginal(prod, MarginalSide::target);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(src.weights()[i] == doctest::Approx(p.weights()[i]).epsilon(1e-14));
    }
    for (std::size_t j = 0; j < q.size(); ++j) {
        CHECK(tgt.weights()[j] == doctest::Approx(q.weights()[j]).epsilon(1e-14));
    }

    const Coupling diag({Point{0.0}, Point{1.0}}, {Point{2.0}, Point{3.0}}, {0.5, 0.0, 0.0, 0.5});
    const DiscreteMeasure dt = marginal(diag, MarginalSide::target);
    CHECK(dt.weights()[0] == 0.5);
    CHECK(dt.weights()[1] == 0.5);

    const Coupling c({Point{0.0}, Point{1.0}}, {Point{2.0}, Point{3.0}}, {0.2, 0.3, 0.1, 0.4});
    const DiscreteMeasure cs = marginal(c, MarginalSide::source);
    CHECK(cs.weights()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cs.weights()[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("relative entropy values") {
    const std::vector<double> p{0.5, 0.5};
    CHECK(relative_entropy(p, p) == 0.0);

    const std::vector<double> q{0.25, 0.75};
    CHECK(relative_entropy(p, q) == doctest::Approx(0.5 * std::log(4.0 / 3.0)).epsilon(1e-14));

    const std::vector<double> d0{1.0, 0.0}, d1{0.0, 1.0};
    CHECK(relative_entropy(d0, d1) == kInf);

    const std::vector<double> bad{0.5, 0.25, 0.25};
    CHECK_THROWS(relative_entropy(p, bad));
}

TEST_CASE("gibbs inequality and support containment on random pairs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const auto p = test::random_prob_vector(rng, n, 0.2);
        const auto q = test::random_prob_vector(rng, n, 0.2);
        const double h = relative_entropy(p, q);
        CHECK(h >= 0.0);
        if (std::isfinite(h)) {
            for (std::size_t i = 0; i < n; ++i) {
                if (p[i] > 0.0) CHECK(q[i] > 0.0);
            }
        }
        CHECK(relative_entropy(p, p) == 0.0);
    }
}

TEST_CASE("tv distance") {
    const DiscreteMeasure p({Point{0.0}, Point{1.0}}, {0.5, 0.5});
    const DiscreteMeasure q({Point{0.0}, Point{1.0}}, {0.25, 0.75});
    CHECK(tv_distance(p, p) == 0.0);
    CHECK(tv_distance(p, q) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(tv_distance(DiscreteMeasure::dirac(Point{0.0}), DiscreteMeasure::dirac(Point{1.0})) ==
          1.0);
    CHECK_THROWS(tv_distance(p, DiscreteMeasure::dirac(Point{0.0, 0.0})));
}

TEST_CASE("wasserstein1 in one dimension") {
    CHECK(wasserstein1_1d(DiscreteMeasure::dirac(Point{0.0}), DiscreteMeasure::dirac(Point{1.0})) ==
          doctest::Approx(1.0));
    const DiscreteMeasure u01 = DiscreteMeasure::uniform({Point{0.0}, Point{1.0}});
    const DiscreteMeasure u23 = DiscreteMeasure::uniform({Point{2.0}, Point{3.0}});
    CHECK(wasserstein1_1d(u01, u01) == 0.0);
    CHECK(wasserstein1_1d(u01, u23) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS(wasserstein1_1d(DiscreteMeasure::dirac(Point{0.0, 0.0}),
                                 DiscreteMeasure::dirac(Point{1.0, 1.0})));
}

TEST_CASE("metric properties on random triples") {
    std::mt19937_64 rng(13);
    const auto pts = test::random_points_1d(rng, 5, -2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const DiscreteMeasure a(pts, test::random_prob_vector(rng, 5, 0.3));
        const DiscreteMeasure b(pts, test::random_prob_vector(rng, 5, 0.3));
        const DiscreteMeasure c(pts, test::random_prob_vector(rng, 5, 0.3));
        CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)).epsilon(1e-14));
        CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12);
        CHECK(wasserstein1_1d(a, b) == doctest::Approx(wasserstein1_1d(b, a)).epsilon(1e-12));
        CHECK(wasserstein1_1d(a, c) <= wasserstein1_1d(a, b) + wasserstein1_1d(b, c) + 1e-12);
        if (tv_distance(a, b) == 0.0) {
            for (std::size_t i = 0; i < 5; ++i) {
                CHECK(a.weights()[i] == doctest::Approx(b.weights()[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("entropy chain rule") {
    std::mt19937_64 rng(17);
    const std::vector<Point> src{Point{0.0}, Point{1.0}, Point{2.0}};
    const std::vector<Point> tgt{Point{5.0}, Point{6.0}, Point{7.0}};

    SUBCASE("identical couplings give zero") {
        const auto w = test::random_prob_vector(rng, 9);
        const Coupling P(src, tgt, w);
        CHECK(entropy_chain_rule_residual(P, P) == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("random absolutely continuous pairs") {
        for (int trial = 0; trial < 100; ++trial) {
            const Coupling R(src, tgt, test::random_prob_vector(rng, 9));
            const Coupling P(src, tgt, test::random_prob_vector(rng, 9, 0.3));
            const double r = entropy_chain_rule_residual(P, R);
            CHECK(std::isfinite(r));
            CHECK(std::abs(r) <= 1e-10);
        }
    }

    SUBCASE("product coupling against uniform, both sides by hand") {
        const DiscreteMeasure pm({Point{0.0}, Point{1.0}, Point{2.0}}, {0.2, 0.3, 0.5});
        const DiscreteMeasure qm({Point{5.0}, Point{6.0}, Point{7.0}}, {0.6, 0.1, 0.3});
        const Coupling P = Coupling::product(pm, qm);
        const Coupling R(src, tgt, std::vector<double>(9, 1.0 / 9.0));

        // left side directly
        StableSum lhs;
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                lhs.add(P.weight(i, j) * std::log(P.weight(i, j) / R.weight(i, j)));
            }
        }
        // right side: marginal entropy plus conditional entropies, by hand
        StableSum rhs;
        for (std::size_t i = 0; i < 3; ++i) {
            rhs.add(pm.weights()[i] * std::log(pm.weights()[i] / (1.0 / 3.0)));
        }
        for (std::size_t i = 0; i < 3; ++i) {
            StableSum inner;
            for (std::size_t j = 0; j < 3; ++j) {
                inner.add(qm.weights()[j] * std::log(qm.weights()[j] / (1.0 / 3.0)));
            }
            rhs.add(pm.weights()[i] * inner.total());
        }
        CHECK(lhs.total() - rhs.total() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(std::abs(entropy_chain_rule_residual(P, R)) <= 1e-10);
    }

    SUBCASE("infinite entropy reports as non-finite") {
        const Coupling R(src, tgt, {0.0, 0.25, 0.25, 0.25, 0.0, 0.25, 0.0, 0.0, 0.0});
        const Coupling P(src, tgt, {0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0});
        CHECK(std::isnan(entropy_chain_rule_residual(P, R)));
    }
}

TEST_CASE("json round trips") {
    std::mt19937_64 rng(19);
    const DiscreteMeasure m(test::random_points_1d(rng, 4, -1.0, 1.0),
                            test::random_prob_vector(rng, 4));
    const DiscreteMeasure m2 = DiscreteMeasure::from_json(m.to_json());
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(m2.points()[i][0] == m.points()[i][0]);
        CHECK(m2.weights()[i] == m.weights()[i]);
    }

    const Coupling c(m.points(), test::random_points_1d(rng, 3, 2.0, 4.0),
                     test::random_prob_vector(rng, 12));
    const Coupling c2 = Coupling::from_json(c.to_json());
    for (std::size_t i = 0; i < c.weights().size(); ++i) {
        CHECK(c2.weights()[i] == c.weights()[i]);
    }
    CHECK(c.to_json().contains("source_support"));
    CHECK(c.to_json().contains("target_support"));
}
