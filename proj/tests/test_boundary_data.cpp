#include <gtest/gtest.h>

#include <random>

#include "qcbvp/boundary_data.hpp"

using namespace qcbvp;

namespace {

BoundaryFunction step_lambda(std::size_t m) {
    return BoundaryFunction::sample([](double s) { return Complex(s < 0.5 ? 1.0 : -1.0); }, m);
}

}  // namespace

TEST(BoundaryData, RejectsUnsortedParameters) {
    EXPECT_THROW(BoundaryFunction({0.2, 0.1}, {1.0, 1.0}), InputError);
    EXPECT_THROW(BoundaryFunction({0.2, 1.0}, {1.0, 1.0}), InputError);
    EXPECT_THROW(BoundaryFunction({0.2}, {1.0, 1.0}), InputError);
}

TEST(BoundaryData, InterpolationIsPeriodic) {
    BoundaryFunction f({0.0, 0.5}, {0.0, 1.0});
    EXPECT_NEAR(f(0.25).real(), 0.5, 1e-15);
    EXPECT_NEAR(f(0.75).real(), 0.5, 1e-15);
    EXPECT_NEAR(f(1.25).real(), 0.5, 1e-15);
}

TEST(BoundaryData, PartitionValidation) {
    EXPECT_THROW(ArcPartition({{0.0, 0.5}}, {0.0, 0.5}), InputError);  // gap
    EXPECT_THROW(ArcPartition({{0.0, 0.6}, {0.5, 0.4}}, {0.0, 0.5, 0.6}), InputError);
    EXPECT_THROW(ArcPartition({{0.0, 0.5}, {0.5, 0.5}}, {0.0}), InputError);  // 0.5 not exceptional
    auto p = ArcPartition::from_breaks({0.75, 0.25});
    ASSERT_EQ(p.arcs().size(), 2u);
    EXPECT_EQ(*p.arc_of(0.5), 0u);
    EXPECT_EQ(*p.arc_of(0.9), 1u);
    EXPECT_EQ(*p.arc_of(0.1), 1u);
    EXPECT_FALSE(p.arc_of(0.25));
    EXPECT_TRUE(ArcPartition::circle().closed_circle());
}

TEST(BoundaryData, VariationOfConstantIsZero) {
    auto f = BoundaryFunction::sample([](double) { return Complex(0.3, -2.0); }, 100);
    EXPECT_EQ(total_variation(f), 0.0);
}

TEST(BoundaryData, VariationOfCyclicStepIsFour) {
    EXPECT_NEAR(total_variation(step_lambda(64)), 4.0, 1e-15);
    // each open half-arc is constant
    auto p = ArcPartition::from_breaks({0.0, 0.5});
    EXPECT_EQ(total_variation(step_lambda(64), p.arcs()[0]), 0.0);
}

TEST(BoundaryData, VariationConvergesToArcLength) {
    double prev = 0;
    for (std::size_t m : {16, 64, 256, 1024, 4096}) {
        const double v = total_variation(BoundaryFunction::on_circle([](double t) { return std::polar(1.0, t); }, m));
        EXPECT_GE(v, prev);
        prev = v;
    }
    EXPECT_NEAR(prev, two_pi, 0.005 * two_pi);
    // inscribed polygon perimeter
    EXPECT_NEAR(prev, 4096 * 2 * std::sin(pi / 4096), 1e-12);
}

TEST(BoundaryData, VariationMonotoneUnderRefinement) {
    auto g = [](double s) { return Complex(std::cos(6 * two_pi * s) + 0.3 * std::sin(two_pi * s), s * s); };
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s;
    for (int k = 0; k < 64; ++k) s.push_back(u(rng));
    std::sort(s.begin(), s.end());
    double prev = 0;
    for (int level = 0; level < 5; ++level) {
        std::vector<Complex> v;
        for (double x : s) v.push_back(g(x));
        const double tv = total_variation(BoundaryFunction(s, v));
        EXPECT_GE(tv, prev - 1e-12);
        prev = tv;
        // add random points: nested refinement
        for (int k = 0; k < 64; ++k) s.push_back(u(rng));
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
}

TEST(BoundaryData, VariationInvariantUnderMonotoneResampling) {
    // the same values carried by a random increasing reparameterization
    auto g = [](double s) { return std::polar(1.0, std::sin(two_pi * s) * 2.0); };
    const std::size_t m = 300;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(m), s(m), s2(m);
    double acc = 0;
    for (std::size_t k = 0; k < m; ++k) acc += (w[k] = u(rng));
    double c = 0;
    for (std::size_t k = 0; k < m; ++k) {
        s[k] = static_cast<double>(k) / m;
        s2[k] = c / acc;
        c += w[k];
    }
    std::vector<Complex> v(m);
    for (std::size_t k = 0; k < m; ++k) v[k] = g(s[k]);
    EXPECT_NEAR(total_variation(BoundaryFunction(s, v)), total_variation(BoundaryFunction(s2, v)), 1e-12);
}

TEST(BoundaryData, CertifySmoothSingleArc) {
    auto f = BoundaryFunction::on_circle([](double t) { return std::polar(1.0, 0.5 * std::sin(t)); }, 256);
    auto c = certify_cbv(f, ArcPartition::circle());
    ASSERT_EQ(c.per_arc_variation.size(), 1u);
    EXPECT_GT(c.sup_variation, 0);
    EXPECT_LT(c.sup_variation, 3.2);
}

TEST(BoundaryData, CertifyStepWithExceptionalJumps) {
    auto c = certify_cbv(step_lambda(64), ArcPartition::from_breaks({0.0, 0.5}));
    ASSERT_EQ(c.per_arc_variation.size(), 2u);
    EXPECT_EQ(c.per_arc_variation[0], 0.0);
    EXPECT_EQ(c.per_arc_variation[1], 0.0);
    EXPECT_EQ(c.sup_variation, 0.0);
    EXPECT_LT(c.exceptional_capacity, 1e-3);
}

TEST(BoundaryData, CertifyRejectsOscillation) {
    const double s0 = 0.3;
    auto f = BoundaryFunction::sample(
        [s0](double s) { return std::polar(1.0, std::sin(1.0 / (s - s0 + 1e-300))); }, 512);
    try {
        certify_cbv(f, ArcPartition::from_breaks({0.0}));
        FAIL() << "oscillating coefficient certified";
    } catch (const CertificationError& e) {
        EXPECT_NE(std::string(e.what()).find("arc 0"), std::string::npos);
    }
    // the same data without an evaluator: detected by decimation
    BoundaryFunction raw(f.params(), f.values());
    EXPECT_THROW(certify_cbv(raw, ArcPartition::from_breaks({0.0})), CertificationError);
    // isolating the bad point does not help: the oscillation lives inside the arc
    EXPECT_THROW(certify_cbv(f, ArcPartition::from_breaks({0.0, s0})), CertificationError);
}

TEST(BoundaryData, CertifyAcceptsSamplesOnBreaks) {
    auto f = step_lambda(8);
    EXPECT_NO_THROW(certify_cbv(f, ArcPartition::from_breaks({0.0, 0.5})));
}

TEST(BoundaryData, ArgumentOfOneIsZero) {
    auto c = certify_cbv(BoundaryFunction::sample([](double) { return Complex(1.0); }, 32), ArcPartition::circle());
    auto a = argument_function(c);
    for (std::size_t k = 0; k < a.alpha.size(); ++k) EXPECT_EQ(a[k], 0.0);
    EXPECT_EQ(a.bound, 0.0);
}

TEST(BoundaryData, ArgumentOfMinusOneIsPlusPi) {
    auto f = BoundaryFunction::sample([](double) { return Complex(-1.0, -0.0); }, 32);
    auto a = argument_function(certify_cbv(f, ArcPartition::circle()));
    for (std::size_t k = 0; k < a.alpha.size(); ++k) EXPECT_DOUBLE_EQ(a[k], pi);
}

TEST(BoundaryData, ArgumentUnwrapsIdentity) {
    const std::size_t m = 1000;
    auto f = BoundaryFunction::on_circle([](double t) { return std::polar(1.0, t); }, m);
    // theta in (-pi, pi): the seam sits at s = 1/2
    auto a = argument_function(certify_cbv(f, ArcPartition::from_breaks({0.5})));
    for (std::size_t k = 0; k < m; ++k) {
        const double s = f.param(k);
        if (std::abs(s - 0.5) < 1e-12) {
            EXPECT_EQ(a[k], 0.0);
            continue;
        }
        // cumulative phase increments from theta = 0
        double ref = 0;
        const long steps = static_cast<long>(k <= m / 2 ? k : static_cast<long>(k) - static_cast<long>(m));
        for (long j = 0; j != steps; j += steps > 0 ? 1 : -1) ref += (steps > 0 ? 1 : -1) * two_pi / m;
        EXPECT_NEAR(a[k], ref, 1e-9) << s;
    }
    EXPECT_NEAR(a.bound, pi, 0.01);
}

TEST(BoundaryData, ArgumentWindingClosedCircleRejected) {
    auto f = BoundaryFunction::on_circle([](double t) { return std::polar(1.0, t); }, 64);
    EXPECT_THROW(argument_function(certify_cbv(f, ArcPartition::circle())), InputError);
}

TEST(BoundaryData, ArgumentRejectsNonUnimodular) {
    auto f = BoundaryFunction::sample([](double) { return Complex(1.1); }, 16);
    EXPECT_THROW(argument_function(certify_cbv(f, ArcPartition::circle())), InputError);
    // exceptional samples are exempt
    auto g = BoundaryFunction::sample([](double s) { return Complex(s == 0 ? 7.0 : 1.0); }, 16);
    EXPECT_NO_THROW(argument_function(certify_cbv(g, ArcPartition::from_breaks({0.0}))));
}

TEST(BoundaryData, ArgumentReproducesLambdaAndBound) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const double a1 = u(rng), a2 = u(rng), w = std::round(u(rng));
        auto f = BoundaryFunction::on_circle(
            [=](double t) { return std::polar(1.0, a1 * std::sin(t) + a2 * std::cos(2 * t) + w * t); }, 512);
        auto part = ArcPartition::from_breaks({0.0, 0.4});
        auto c = certify_cbv(f, part);
        auto a = argument_function(c);
        for (std::size_t k = 0; k < f.size(); ++k) {
            if (part.is_exceptional(f.param(k))) continue;
            EXPECT_LT(std::abs(std::polar(1.0, a[k]) - f.value(k)), 1e-9);
        }
        EXPECT_LE(a.bound, pi + 1.5 * pi * c.sup_variation);
        // variation of alpha on each arc within 3 pi V_n / 2
        for (std::size_t i = 0; i < part.arcs().size(); ++i)
            EXPECT_LE(total_variation(a.alpha, part.arcs()[i]), 1.5 * pi * c.per_arc_variation[i] + 1e-9);
    }
}
