#include <gtest/gtest.h>

#include <random>

#include "qcbvp/beltrami.hpp"

using namespace qcbvp;

namespace {

BeltramiOptions grid_opts(std::size_t n, double L = 8) {
    BeltramiOptions o;
    o.grid = n;
    o.extent = L;
    return o;
}

GridField disk_indicator(std::size_t n, double L) {
    return GridField::sample([](Complex z) { return std::norm(z) < 1 ? Complex(1.0) : Complex(0.0); }, n, L, 8);
}

// sup |F - ref| over cells with |z| in [r0, r1], at least `band` away from |z| = 1
double annulus_error(const GridField& F, const std::function<Complex(Complex)>& ref, double r0, double r1, double band) {
    double e = 0;
    for (std::size_t j = 0; j < F.n(); ++j)
        for (std::size_t i = 0; i < F.n(); ++i) {
            const Complex z = F.point(i, j);
            const double r = std::abs(z);
            if (r < r0 || r > r1 || std::abs(r - 1) < band) continue;
            e = std::max(e, std::abs(F(i, j) - ref(z)));
        }
    return e;
}

std::vector<Complex> disk_samples(int count, double rmax) {
    std::vector<Complex> pts;
    for (int k = 0; k < count; ++k) pts.push_back(std::polar(rmax * std::sqrt((k % 17) / 16.0), 0.61 * k + 0.05));
    return pts;
}

BoundaryFunction trig(double a, double b) {
    return BoundaryFunction::sample(
        [a, b](double s) { return Complex(a * std::cos(two_pi * s) + b * std::sin(two_pi * s)); }, 64);
}

BoundaryFunction constant_data(Complex c) {
    return BoundaryFunction::sample([c](double) { return c; }, 64);
}

}  // namespace

TEST(Grid, SampleInterpolateNorms) {
    auto g = GridField::sample([](Complex z) { return 2.0 * z + Complex(1, -1); }, 64, 2.0);
    EXPECT_DOUBLE_EQ(g.spacing(), 2 * 2.0 / 64);
    EXPECT_LT(std::abs(g.interpolate({0.3, -0.7}) - (2.0 * Complex(0.3, -0.7) + Complex(1, -1))), 1e-12);
    EXPECT_THROW(g.interpolate({2.5, 0}), DomainError);
    auto one = GridField::sample([](Complex) { return Complex(1.0); }, 32, 1.0);
    EXPECT_NEAR(one.l2_norm(), 2.0, 1e-12);
    EXPECT_TRUE(one.touches_boundary());
    EXPECT_FALSE(disk_indicator(32, 2.0).touches_boundary());
    EXPECT_THROW(GridField(32, 1.0) + GridField(32, 2.0), InputError);
}

TEST(Grid, CauchyZeroAndLinearity) {
    const std::size_t n = 128;
    const double L = 4;
    EXPECT_EQ(cauchy_transform(GridField(n, L)).sup_norm(), 0.0);
    EXPECT_EQ(beurling_transform(GridField(n, L)).sup_norm(), 0.0);
    auto f = GridField::sample([](Complex z) { return std::exp(-std::norm(z)) * z; }, n, L);
    auto g = GridField::sample([](Complex z) { return std::norm(z) < 2 ? Complex(0.5, std::real(z)) : Complex(0.0); }, n, L);
    const auto lhs = cauchy_transform(f + g);
    const auto rhs = cauchy_transform(f) + cauchy_transform(g);
    EXPECT_LE((lhs - rhs).sup_norm(), 1e-12 * lhs.sup_norm());
}

TEST(Grid, CauchyOfDiskIndicator) {
    const std::size_t n = 256;
    const double L = 4;
    const auto F = cauchy_transform(disk_indicator(n, L));
    const double h = F.spacing();
    auto ref = [](Complex z) { return std::norm(z) < 1 ? std::conj(z) : 1.0 / z; };
    EXPECT_LE(annulus_error(F, ref, 0.0, 3.0, 4 * h), 2 * h);
    // F_zbar = 1 inside
    const double d = 2 * h;
    for (Complex z : {Complex(0.2, 0.1), Complex(-0.4, 0.3)}) {
        const Complex fzb = 0.5 * ((F.interpolate(z + d) - F.interpolate(z - d)) / (2 * d) +
                                   I * (F.interpolate(z + I * d) - F.interpolate(z - I * d)) / (2 * d));
        EXPECT_NEAR(std::abs(fzb - 1.0), 0.0, 1e-2);
    }
}

TEST(Grid, BeurlingOfDiskIndicator) {
    const std::size_t n = 512;
    const double L = 8;
    TransformInfo info;
    const auto S = beurling_transform(disk_indicator(n, L), &info);
    EXPECT_FALSE(info.truncated);
    const double h = S.spacing();
    auto ref = [](Complex z) { return std::norm(z) < 1 ? Complex(0.0) : -1.0 / (z * z); };
    EXPECT_LE(annulus_error(S, ref, 0.5, 4.0, 4 * h), 3 * h);
}

TEST(Grid, TruncationFlag) {
    TransformInfo info;
    beurling_transform(GridField::sample([](Complex) { return Complex(0.1); }, 64, 1.0), &info);
    EXPECT_TRUE(info.truncated);
}

TEST(Grid, BeurlingIsNearIsometry) {
    std::mt19937 rng(12345);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    std::vector<std::pair<Complex, Complex>> bumps;
    for (int k = 0; k < 12; ++k) bumps.push_back({Complex(U(rng), U(rng)), Complex(N(rng), N(rng))});
    auto f = GridField::sample(
        [&](Complex z) {
            Complex s = 0;
            for (const auto& [c, a] : bumps) s += a * std::exp(-std::norm(z - c) / 0.18);
            return s;
        },
        512, 8.0);
    const double ratio = beurling_transform(f).l2_norm() / f.l2_norm();
    EXPECT_NEAR(ratio, 1.0, 0.02);
}

TEST(Beltrami, CoefficientValidation) {
    EXPECT_THROW(BeltramiCoefficient::constant(1.0), InputError);
    EXPECT_THROW(BeltramiCoefficient::from_function([](Complex) { return Complex(0.0); }, 1.2), InputError);
    EXPECT_TRUE(BeltramiCoefficient::constant(0.0).is_zero());
    auto m = BeltramiCoefficient::constant(Complex(0, 0.3), 2.0);
    EXPECT_EQ(m(1.0), Complex(0, 0.3));
    EXPECT_EQ(m(3.0), Complex(0.0));
}

TEST(Beltrami, PrincipalSolutionZeroIsIdentity) {
    auto G = principal_solution(BeltramiCoefficient::zero(), grid_opts(64));
    for (Complex w : disk_samples(30, 0.9)) EXPECT_LT(std::abs(G(w) - w), 1e-14);
    EXPECT_EQ(G.history.iterations, 0);
}

TEST(Beltrami, ConstantCoefficientOnLargeDisk) {
    for (Complex c : {Complex(0.3), Complex(0, 0.3)}) {
        auto G = principal_solution(BeltramiCoefficient::constant(c, 8.0), grid_opts(512));
        double err = 0;
        for (Complex w : disk_samples(200, 1.0)) err = std::max(err, std::abs(G(w) - (w + c * std::conj(w))));
        EXPECT_LE(err, 1e-2) << c;
        EXPECT_LE(G.history.contraction, 0.3 * 1.02);
        EXPECT_GT(G.history.iterations, 3);
        EXPECT_TRUE(G.truncated);
    }
}

TEST(Beltrami, NeumannIncrementsContract) {
    const std::vector<BeltramiCoefficient> fixtures{
        BeltramiCoefficient::constant(0.5, 2.0),
        BeltramiCoefficient::from_function(
            [](Complex z) { return std::norm(z) < 4 ? 0.6 * std::exp(-std::norm(z)) * Complex(std::cos(3 * z.real()), 0.5) : Complex(0.0); },
            0.6 * std::abs(Complex(1, 0.5))),
    };
    for (const auto& mu : fixtures) {
        auto G = principal_solution(mu, grid_opts(256));
        EXPECT_LE(G.history.contraction, mu.k * 1.02);
        const auto& inc = G.history.increments;
        for (std::size_t i = 1; i < inc.size(); ++i) {
            if (inc[i - 1] > 1e-12) {
                EXPECT_LE(inc[i], mu.k * 1.02 * inc[i - 1] + 1e-13);
            }
        }
    }
}

TEST(Beltrami, IterationLimitReported) {
    auto o = grid_opts(64);
    o.max_iter = 2;
    EXPECT_THROW(principal_solution(BeltramiCoefficient::constant(0.5, 2.0), o), ConvergenceError);
}

TEST(Beltrami, DiskNormalizedZeroIsIdentity) {
    auto G = disk_normalized_qc(BeltramiCoefficient::zero(), grid_opts(64));
    EXPECT_TRUE(G.is_identity());
    EXPECT_EQ(G(Complex(0.3, 0.2)), Complex(0.3, 0.2));
}

TEST(Beltrami, DiskNormalizedRadialProfile) {
    const double k = 0.2;
    auto nu = BeltramiCoefficient::from_function(
        [k](Complex w) { return std::norm(w) > 0 ? k * w / std::conj(w) : Complex(0.0); }, k);
    auto G = disk_normalized_qc(nu, grid_opts(512));
    // G(r e^it) = rho(r) e^it with r rho'/rho = (1+k)/(1-k), rho(1) = 1; integrate inward with RK4
    auto rhs = [k](double r, double rho) { return rho * (1 + k) / ((1 - k) * r); };
    std::vector<std::pair<double, double>> prof;
    double r = 1, rho = 1;
    const int steps = 2000;
    const double dr = -0.9 / steps;
    for (int s = 0; s <= steps; ++s) {
        if (s % 200 == 0) prof.push_back({r, rho});
        const double k1 = rhs(r, rho), k2 = rhs(r + dr / 2, rho + dr / 2 * k1), k3 = rhs(r + dr / 2, rho + dr / 2 * k2),
                     k4 = rhs(r + dr, rho + dr * k3);
        rho += dr / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        r += dr;
    }
    for (const auto& [rr, pr] : prof) {
        double lo = 1e9, hi = 0;
        for (int j = 0; j < 24; ++j) {
            const Complex w = std::polar(rr, two_pi * j / 24 + 0.1);
            const Complex v = G(w);
            lo = std::min(lo, std::abs(v));
            hi = std::max(hi, std::abs(v));
            EXPECT_NEAR(std::abs(v - pr * w / rr), 0.0, 3e-3) << rr;
        }
        EXPECT_LE(hi - lo, 3e-3) << rr;  // circles to circles
    }
}

TEST(Beltrami, DiskNormalizationContract) {
    const auto opt = grid_opts(256);
    const std::vector<BeltramiCoefficient> fixtures{
        BeltramiCoefficient::constant(0.3),
        BeltramiCoefficient::from_function([](Complex w) { return 0.4 * Complex(0.5, w.real()) * std::norm(w); }, 0.4 * std::abs(Complex(0.5, 1))),
    };
    for (const auto& nu : fixtures) {
        auto G = disk_normalized_qc(nu, opt);
        EXPECT_LT(std::abs(G(0.0)), 1e-9);
        EXPECT_NEAR(std::arg(G(1.0)), 0.0, 1e-12);
        EXPECT_LT(std::abs(G(1.0) - 1.0), 1e-3);
        EXPECT_LE(G.circle_deviation, 1e-3);
        for (int j = 0; j < 64; ++j) EXPECT_NEAR(std::abs(G(std::polar(1.0, two_pi * j / 64 + 0.02))), 1.0, 1e-3);
        for (int j = 0; j < 40; ++j) {
            const Complex w = std::polar(0.3 + 0.015 * j, 0.77 * j);
            EXPECT_LT(std::abs(G(1.0 / std::conj(w)) - 1.0 / std::conj(G(w))), 1e-3);
        }
        EXPECT_GT(G.residual.min_jacobian, 0);
    }
}

TEST(Beltrami, PushforwardTrivialCases) {
    auto g = moebius_map(0.5);
    EXPECT_TRUE(pushforward_coefficient(BeltramiCoefficient::zero(), g).is_zero());
    auto mu = BeltramiCoefficient::from_function([](Complex z) { return 0.2 * z; }, 0.2);
    auto nu = pushforward_coefficient(mu, identity_map());
    for (Complex w : disk_samples(20, 0.9)) EXPECT_EQ(nu(w), mu(w));
}

TEST(Beltrami, PushforwardMoebius) {
    const double a = 0.5;
    auto g = moebius_map(a);
    auto nu = pushforward_coefficient(BeltramiCoefficient::constant(0.3), g);
    std::vector<Complex> pts = disk_samples(300, 0.98);
    for (Complex w : pts) {
        const Complex z = (w + a) / (1.0 + a * w);
        const Complex gp = (1 - a * a) / ((1.0 - a * z) * (1.0 - a * z));
        EXPECT_LT(std::abs(nu(w) - 0.3 * gp / std::conj(gp)), 1e-12);
    }
    EXPECT_NEAR(sampled_sup(nu.fn, pts), 0.3, 1e-9);
    EXPECT_DOUBLE_EQ(nu.k, 0.3);
}

TEST(Beltrami, PushforwardPreservesSupOnTheodorsenMap) {
    auto g = theodorsen_map(PlanarDomain(JordanCurve::ellipse(1.5, 1), 0.0));
    auto mu = BeltramiCoefficient::from_function([](Complex z) { return 0.4 * std::polar(1.0, 2 * z.real()); }, 0.4);
    auto nu = pushforward_coefficient(mu, g);
    EXPECT_NEAR(sampled_sup(nu.fn, disk_samples(200, 0.95)), 0.4, 1e-9);
}

TEST(Beltrami, AssembleZeroCoefficientIsDiskHilbert) {
    PipelineOptions o;
    o.modes = 256;
    auto sol = assemble_regular_solution(PlanarDomain::unit_disk(), BeltramiCoefficient::zero(), identity_map(),
                                         constant_data(1.0), ArcPartition::circle(), trig(1, 0), o);
    for (Complex z : disk_samples(100, 0.9)) EXPECT_LT(std::abs(sol(z) - z), 1e-6);
    EXPECT_LE(sol.report.beltrami_sup, 1e-6);
    EXPECT_LE(sol.report.boundary.max_residual, 1e-6);
    EXPECT_TRUE(sol.report.pass);
}

TEST(Beltrami, AssembleConstantCoefficient) {
    PipelineOptions o;
    o.modes = 256;
    o.beltrami = grid_opts(256);
    auto sol = assemble_regular_solution(PlanarDomain::unit_disk(), BeltramiCoefficient::constant(0.3), identity_map(),
                                         constant_data(1.0), ArcPartition::circle(), trig(1, 0), o);
    const auto& r = sol.report;
    EXPECT_LE(r.beltrami_sup, 1e-2 * r.fz_sup);
    EXPECT_GT(r.beltrami_points, 0u);
    EXPECT_LE(r.boundary.max_residual, 1e-2);
    EXPECT_EQ(r.boundary.failed, 0u);
    EXPECT_GT(r.boundary.verified, 0u);
    EXPECT_TRUE(r.pass);
    // composition consistency
    for (Complex z : disk_samples(60, 0.9)) EXPECT_LT(std::abs(sol(z) - sol.A.f(sol.G(sol.g->forward(z)))), 1e-9);
    const auto st = stoilow_report(sol, disk_samples(60, 0.9));
    EXPECT_TRUE(st.consistent);
    EXPECT_TRUE(st.locally_injective);
}

TEST(Beltrami, AssembleZeroData) {
    PipelineOptions o;
    o.modes = 128;
    o.beltrami = grid_opts(128);
    auto sol = assemble_regular_solution(PlanarDomain::unit_disk(), BeltramiCoefficient::constant(0.2), identity_map(),
                                         BoundaryFunction::sample([](double s) { return std::polar(1.0, 0.5 * std::cos(two_pi * s)); }, 64),
                                         ArcPartition::circle(), constant_data(0.0), o);
    for (Complex z : disk_samples(40, 0.95)) EXPECT_EQ(std::abs(sol(z)), 0.0);
    EXPECT_EQ(sol.report.beltrami_sup, 0.0);
    EXPECT_EQ(sol.report.boundary.max_residual, 0.0);
    EXPECT_TRUE(sol.report.pass);
}

TEST(Beltrami, StoilowNegativeControl) {
    PipelineOptions o;
    o.modes = 128;
    auto sol = assemble_regular_solution(PlanarDomain::unit_disk(), BeltramiCoefficient::zero(), identity_map(),
                                         constant_data(1.0), ArcPartition::circle(), trig(1, 0), o);
    const auto pts = disk_samples(40, 0.9);
    EXPECT_TRUE(stoilow_report(sol, pts).consistent);
    std::mt19937 rng(7);
    std::normal_distribution<double> N(0, 1e-6);
    auto noisy = [&](Complex z) { return sol(z) + Complex(N(rng), N(rng)); };
    const auto bad = stoilow_report(noisy, sol.A.f, [&](Complex z) { return sol.h(z); }, pts);
    EXPECT_FALSE(bad.consistent);
    EXPECT_GT(bad.max_mismatch, 1e-9);
}

TEST(Beltrami, StoilowConformalJacobian) {
    auto g = theodorsen_map(PlanarDomain(JordanCurve::ellipse(1.5, 1), 0.0));
    const AnalyticDiskFunction A({0.0, 0.0, 1.0});
    auto h = [&g](Complex z) { return g.forward(z); };
    const std::vector<Complex> pts{{0.1, 0.2}, {-0.8, 0.3}, {0.5, -0.5}};
    const auto r = stoilow_report([&](Complex z) { return A(h(z)); }, A, h, pts, 1e-4);
    EXPECT_TRUE(r.consistent);
    double expect = 1e9;
    for (Complex z : pts) expect = std::min(expect, std::norm(g.derivative(z)));
    EXPECT_NEAR(r.min_jacobian, expect, 1e-6);
}
