#include <gtest/gtest.h>

#include "qcbvp/curve_geometry.hpp"

using namespace qcbvp;

namespace {

// brute force over every polyline segment
double scan_distance(const JordanCurve& c, Complex z) {
    const auto& p = c.samples();
    double best = 1e300;
    for (std::size_t i = 0; i < p.size(); ++i)
        best = std::min(best, CurvePiece::segment(p[i], p[(i + 1) % p.size()]).nearest(z).second);
    return best;
}

}  // namespace

TEST(CurveGeometry, CircleInvariants) {
    auto c = JordanCurve::circle(0.0, 1.0, 512);
    EXPECT_GT(c.signed_area(), 0);
    EXPECT_TRUE(c.is_simple());
    EXPECT_NEAR(std::abs(c.point(0.0) - c.point(1.0)), 0.0, 1e-14);
}

TEST(CurveGeometry, ClockwiseSamplesRejected) {
    std::vector<Complex> pts{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    EXPECT_THROW(JordanCurve::from_samples(pts), InputError);
}

TEST(CurveGeometry, SelfIntersectingPolylineDetected) {
    std::vector<Complex> bow{{0, 0}, {2, 0}, {2, 2}, {1, -1}, {0, 2}};
    auto c = JordanCurve::from_samples(bow);
    EXPECT_FALSE(c.is_simple());
}

TEST(CurveGeometry, DistanceToBoundaryDisk) {
    auto d = PlanarDomain::unit_disk();
    EXPECT_NEAR(distance_to_boundary(d, 0.0), 1.0, 1e-12);
    EXPECT_NEAR(distance_to_boundary(d, 0.5), 0.5, 1e-12);
    EXPECT_THROW(distance_to_boundary(d, 2.0), DomainError);
    EXPECT_THROW(distance_to_boundary(d, 1.0), DomainError);
}

TEST(CurveGeometry, ThreeDiskDistanceMatchesSegmentScan) {
    auto d = PlanarDomain::three_disks();
    const auto& c = d.boundary();
    // the cusp point itself lies on the boundary
    EXPECT_THROW(distance_to_boundary(d, 1.0), DomainError);
    for (Complex z : {Complex(0.9, 0), Complex(0.99, 0.001), Complex(0.5, 0.5), Complex(1.2, 0.7), Complex(-0.3, 0.2)}) {
        const double exact = distance_to_boundary(d, z);
        EXPECT_NEAR(exact, scan_distance(c, z), 2e-6) << z;
    }
    // the polyline path agrees with the scan exactly
    auto poly = JordanCurve::from_samples(c.samples());
    for (Complex z : {Complex(0.9, 0), Complex(0.2, -0.4), Complex(1.5, -1.2)})
        EXPECT_NEAR(poly.distance(z), scan_distance(c, z), 1e-14);
}

TEST(CurveGeometry, PolylineContainmentMatchesExact) {
    auto c = JordanCurve::three_disks();
    auto poly = JordanCurve::from_samples(c.samples());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(-1.2, 2.2), uy(-2.2, 2.2);
    int mismatch = 0;
    for (int k = 0; k < 20000; ++k) {
        Complex z(ux(rng), uy(rng));
        if (c.distance(z) < 1e-5) continue;
        mismatch += c.contains(z) != poly.contains(z);
    }
    EXPECT_EQ(mismatch, 0);
}

TEST(CurveGeometry, TangentCircle) {
    auto c = JordanCurve::circle();
    auto t = c.tangent_at(0.0);
    ASSERT_TRUE(t);
    EXPECT_NEAR(std::abs(*t - I), 0.0, 1e-6);
}

TEST(CurveGeometry, TangentSquareCornerNone) {
    auto c = JordanCurve::square();
    EXPECT_FALSE(c.tangent_at(0.0));
    EXPECT_TRUE(c.tangent_at(0.125));
    auto poly = JordanCurve::from_samples(c.samples());
    EXPECT_FALSE(poly.tangent_at(0.0));
    EXPECT_FALSE(poly.tangent_at(0.25));
}

TEST(CurveGeometry, ThreeDiskCuspHasHorizontalTangent) {
    auto c = JordanCurve::three_disks();
    auto t = c.tangent_at(0.0);
    ASSERT_TRUE(t);
    // compare as a line: direction modulo pi
    EXPECT_NEAR(std::sin(std::arg(*t)), 0.0, 1e-6);
    // corners at ±i have no tangent
    EXPECT_FALSE(c.tangent_at(0.375));
    EXPECT_FALSE(c.tangent_at(0.625));
    // secant-limit oracle on both sides of the cusp
    for (double h : {1e-3, 1e-4, 1e-5}) {
        Complex fwd = c.point(h) - 1.0, bwd = 1.0 - c.point(1 - h);
        EXPECT_LT(std::abs(std::sin(std::arg(fwd))), 8 * h);
        EXPECT_LT(std::abs(std::sin(std::arg(bwd))), 8 * h);
    }
}

TEST(CurveGeometry, NontangentialPoints) {
    auto d = PlanarDomain::unit_disk();
    auto pts = nontangential_points({0.0, 0.0, {0.1, 0.01}}, d);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_NEAR(std::abs(pts[0] - 0.9), 0, 1e-9);
    EXPECT_NEAR(std::abs(pts[1] - 0.99), 0, 1e-9);
    auto cone = nontangential_points({0.0, pi / 3, {0.1, 0.01}}, d);
    EXPECT_EQ(cone.size(), 6u);
    for (auto z : cone) {
        EXPECT_TRUE(d.contains(z));
        EXPECT_LE(std::abs(std::arg((z - 1.0) / -1.0)), pi / 3 + 1e-12);
    }
    auto sq = PlanarDomain(JordanCurve::square(), 0.0);
    EXPECT_THROW(nontangential_points({0.0, 0.1, {0.1}}, sq), UnsupportedError);
}

TEST(CurveGeometry, QuasihyperbolicDiskRadial) {
    auto d = PlanarDomain::unit_disk();
    QuasihyperbolicField f(d, 0.0, 1.0 / 256);
    EXPECT_NEAR(f.distance(0.5), std::log(2.0), 0.02 * std::log(2.0));
    EXPECT_NEAR(f.distance(0.9), std::log(10.0), 0.02 * std::log(10.0));
    EXPECT_EQ(quasihyperbolic_distance(d, 0.3, 0.3, 1.0 / 64), 0.0);
}

TEST(CurveGeometry, QuasihyperbolicMetricProperties) {
    auto d = PlanarDomain::unit_disk();
    const double h = 1.0 / 128;
    const Complex a(0.3, 0.2), b(-0.4, 0.5), c(0.1, -0.6);
    const double ab = quasihyperbolic_distance(d, a, b, h), ba = quasihyperbolic_distance(d, b, a, h);
    const double bc = quasihyperbolic_distance(d, b, c, h), ac = quasihyperbolic_distance(d, a, c, h);
    const double tol = 0.03 * std::max(ab, ba);
    EXPECT_GT(ab, 0);
    EXPECT_NEAR(ab, ba, 2 * tol);
    EXPECT_LE(ac, ab + bc + tol);
    // refinement does not increase the estimate beyond tolerance
    const double coarse = quasihyperbolic_distance(d, 0.5, 0.0, 1.0 / 64);
    const double fine = quasihyperbolic_distance(d, 0.5, 0.0, 1.0 / 256);
    EXPECT_LE(fine, coarse + 1e-3);
}

TEST(CurveGeometry, QhbDiskRadialProbes) {
    auto d = PlanarDomain::unit_disk();
    std::vector<Complex> probes;
    for (double dist : {0.5, 0.3, 0.1, 0.05, 0.02, 0.01, 0.005}) probes.push_back(1.0 - dist);
    auto fit = check_qhb_condition(d, 0.0, probes, 1.0 / 256);
    EXPECT_NEAR(fit.a, 1.0, 0.03);
    EXPECT_NEAR(fit.b, 0.0, 0.03);
    EXPECT_TRUE(fit.holds);
    // forced a = 1, b = 0: residuals within the discretization tolerance
    for (std::size_t i = 0; i < probes.size(); ++i) EXPECT_LE(fit.k[i] - fit.log_ratio[i], 0.03);
    EXPECT_THROW(check_qhb_condition(d, 0.0, {0.5}), InputError);
}

TEST(CurveGeometry, AConditionDiskHalf) {
    auto d = PlanarDomain::unit_disk();
    auto p = check_A_condition(d, 1.0, {0.1, 0.05, 0.01}, 40000);
    for (double r : p.ratio) {
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
    }
    EXPECT_NEAR(p.ratio.back(), 0.5, 0.01);
    EXPECT_TRUE(p.degenerate_side.empty());
    EXPECT_THROW(check_A_condition(d, 1.0, {}), InputError);
}

TEST(CurveGeometry, AConditionThreeDiskCusp) {
    auto d = PlanarDomain::three_disks();
    auto p = check_A_condition(d, 1.0, {0.2, 0.1, 0.05, 0.025});
    EXPECT_EQ(p.degenerate_side, "complement");
    EXPECT_TRUE(p.monotone_to_degenerate);
    EXPECT_FALSE(p.complement_side_holds);
    EXPECT_GT(p.ratio.back(), 0.99);
}
