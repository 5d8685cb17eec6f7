#include <gtest/gtest.h>

#include <random>

#include "qcbvp/capacity.hpp"

using namespace qcbvp;

TEST(Capacity, VandermondeProduct) {
    EXPECT_DOUBLE_EQ(vandermonde_product({0.0, 1.0}), 1.0);
    std::vector<Complex> roots{1.0, std::polar(1.0, two_pi / 3), std::polar(1.0, 2 * two_pi / 3)};
    EXPECT_NEAR(vandermonde_product(roots), 3 * std::sqrt(3.0), 1e-12);
    EXPECT_EQ(vandermonde_product({0.5, 0.5, 1.0}), 0.0);
    EXPECT_THROW(vandermonde_product({1.0}), InputError);
}

TEST(Capacity, VandermondeInvariances) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    std::vector<Complex> z;
    for (int k = 0; k < 8; ++k) z.emplace_back(g(rng), g(rng));
    const double v = log_vandermonde(z);
    auto p = z;
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_NEAR(log_vandermonde(p), v, 1e-12);
    for (auto& w : p) w += Complex(3.5, -1.25);
    EXPECT_NEAR(log_vandermonde(p), v, 1e-11);
}

TEST(Capacity, FeketeCircleMatchesExhaustiveSearch) {
    auto cand = circle_sampler(0.0, 1.0, 90);
    double best = 0;
    for (std::size_t a = 0; a < cand.size(); ++a)
        for (std::size_t b = a + 1; b < cand.size(); ++b)
            for (std::size_t c = b + 1; c < cand.size(); ++c)
                best = std::max(best, vandermonde_product({cand[a], cand[b], cand[c]}));
    auto r = fekete_points(cand, 3);
    EXPECT_NEAR(r.V, best, 1e-12);
    EXPECT_NEAR(r.V, 3 * std::sqrt(3.0), 1e-12);
    // no single exchange improves the product
    for (std::size_t m = 0; m < 3; ++m)
        for (const auto& c : cand) {
            auto pts = r.points;
            pts[m] = c;
            EXPECT_LE(vandermonde_product(pts), r.V * (1 + 1e-9));
        }
}

TEST(Capacity, FeketeSmallCases) {
    auto r = fekete_points(circle_sampler(0.0, 1.0, 64), 2);
    EXPECT_NEAR(r.V, 2.0, 1e-12);
    auto two = fekete_points({0.0, 1.0}, 2);
    EXPECT_EQ(two.indices.size(), 2u);
    EXPECT_DOUBLE_EQ(two.V, 1.0);
    EXPECT_THROW(fekete_points({}, 2), InputError);
}

TEST(Capacity, CircleRadiusTwo) {
    auto est = transfinite_diameter(circle_sampler(0.0, 2.0), 30);
    EXPECT_GE(est.extrapolated_tau, 1.98);
    EXPECT_LE(est.extrapolated_tau, 2.02);
    EXPECT_TRUE(est.monotone);
    // equally spaced points: V_n = R^{n(n-1)/2} n^{n/2}, so tau_n = R n^{1/(n-1)} up to candidate spacing
    for (std::size_t i = 0; i < est.n.size(); ++i) {
        const double n = static_cast<double>(est.n[i]);
        EXPECT_NEAR(est.tau[i], 2.0 * std::pow(n, 1.0 / (n - 1)), 1e-5 * est.tau[i]);
    }
}

TEST(Capacity, SegmentLengthFour) {
    auto est = transfinite_diameter(segment_sampler(-2.0, 2.0), 30);
    EXPECT_GE(est.extrapolated_tau, 0.98);
    EXPECT_LE(est.extrapolated_tau, 1.02);
    for (std::size_t i = 1; i < est.tau.size(); ++i) EXPECT_LE(est.tau[i], est.tau[i - 1] * (1 + 1e-6));
}

TEST(Capacity, ScalingCovariance) {
    const double s = 3.0;
    auto c1 = transfinite_diameter(circle_sampler(0.0, 1.0, 1024), 20).extrapolated_tau;
    auto c3 = transfinite_diameter(circle_sampler(0.0, s, 1024), 20).extrapolated_tau;
    EXPECT_NEAR(c3, s * c1, 0.01 * s * c1);
    auto g1 = transfinite_diameter(segment_sampler(-1.0, 1.0, 1024), 20).extrapolated_tau;
    auto g3 = transfinite_diameter(segment_sampler(-s, s, 1024), 20).extrapolated_tau;
    EXPECT_NEAR(g3, s * g1, 0.01 * s * g1);
}

TEST(Capacity, SinglePointSet) {
    std::vector<Complex> pts(10, Complex(0.3, 0.1));
    auto est = transfinite_diameter(pts, 5);
    for (double t : est.tau) EXPECT_EQ(t, 0.0);
    EXPECT_EQ(est.extrapolated_tau, 0.0);
}

TEST(Capacity, LogarithmicPotential) {
    MassDistribution unit({0.0}, {1.0});
    EXPECT_NEAR(logarithmic_potential(unit, 1.0), 0.0, 1e-15);
    EXPECT_NEAR(logarithmic_potential(unit, std::exp(1.0)), -1.0, 1e-15);
    EXPECT_TRUE(std::isinf(logarithmic_potential(unit, 0.0)));
    MassDistribution pair({-1.0, 1.0}, {0.5, 0.5});
    EXPECT_NEAR(logarithmic_potential(pair, 0.0), 0.0, 1e-15);
    EXPECT_THROW(MassDistribution({0.0}, {0.5}), InputError);
    EXPECT_THROW(MassDistribution({0.0, 1.0}, {1.5, -0.5}), InputError);
}

TEST(Capacity, Negligible) {
    EXPECT_TRUE(is_negligible({}));
    EXPECT_TRUE(is_negligible({Complex(0.2, 0.4)}));
    EXPECT_TRUE(is_negligible({1.0, -1.0}));
    EXPECT_FALSE(is_negligible(circle_sampler(0.0, 1.0, 256)));
}
