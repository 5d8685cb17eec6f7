#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "qcbvp/boundary_data.hpp"
#include "qcbvp/conformal.hpp"
#include "qcbvp/core.hpp"
#include "qcbvp/disk_analytic.hpp"
#include "qcbvp/grid.hpp"

namespace qcbvp {

/// Complex dilatation with ||mu||_inf = k < 1.
struct BeltramiCoefficient {
    std::function<Complex(Complex)> fn;
    double k = 0;
    std::string kind = "zero";

    Complex operator()(Complex z) const { return fn ? fn(z) : Complex(0.0); }
    bool is_zero() const { return k == 0; }

    static BeltramiCoefficient zero() { return {}; }

    /// c inside |z| < radius, 0 outside.
    static BeltramiCoefficient constant(Complex c, double radius = std::numeric_limits<double>::infinity()) {
        BeltramiCoefficient m;
        m.kind = "constant";
        m.k = std::abs(c);
        check(m.k);
        if (m.k == 0) return zero();
        m.fn = [c, radius](Complex z) { return std::abs(z) < radius ? c : Complex(0.0); };
        return m;
    }

    static BeltramiCoefficient from_function(std::function<Complex(Complex)> f, double k, std::string kind = "function") {
        check(k);
        BeltramiCoefficient m;
        m.fn = std::move(f);
        m.k = k;
        m.kind = std::move(kind);
        return m;
    }

    /// Bilinear interpolation of grid values, 0 off the grid.
    static BeltramiCoefficient from_grid(const GridField& g) {
        auto p = std::make_shared<GridField>(g);
        return from_function([p](Complex z) { return p->inside(z) ? p->interpolate(z) : Complex(0.0); }, g.sup_norm(),
                             "grid");
    }

    static void check(double k) {
        if (!(k >= 0 && k < 1)) throw InputError("beltrami", "degenerate coefficient: need ||mu||_inf < 1");
    }
};

/// sup |f| over the sample points.
inline double sampled_sup(const std::function<Complex(Complex)>& f, const std::vector<Complex>& pts) {
    double m = 0;
    for (const auto& z : pts) m = std::max(m, std::abs(f(z)));
    return m;
}

struct NeumannHistory {
    std::vector<double> increments;  // ||h_{n+1} - h_n||_2
    double contraction = 0;          // largest ratio of successive increments above round-off
    int iterations = 0;
};

struct GridResidual {
    double l2 = 0;        // ||G_zbar - mu G_z||_2 / ||G_z||_2
    double sup = 0;
    double gz_sup = 0;
    double min_jacobian = 0;
};

/// Centred differences at spacing stride*h over cells whose stencil fits;
/// mask (optional) restricts the cells.
inline GridResidual grid_beltrami_residual(const GridField& G, const GridField& mu, std::size_t stride = 4,
                                           const std::function<bool(Complex)>& mask = {}) {
    GridResidual r;
    r.min_jacobian = std::numeric_limits<double>::infinity();
    const std::size_t n = G.n();
    const double d = 2.0 * stride * G.spacing();
    double num = 0, den = 0;
    for (std::size_t j = stride; j + stride < n; ++j)
        for (std::size_t i = stride; i + stride < n; ++i) {
            if (mask && !mask(G.point(i, j))) continue;
            const Complex gx = (G(i + stride, j) - G(i - stride, j)) / d;
            const Complex gy = (G(i, j + stride) - G(i, j - stride)) / d;
            const Complex gz = 0.5 * (gx - I * gy), gzb = 0.5 * (gx + I * gy);
            const double e = std::abs(gzb - mu(i, j) * gz);
            num += e * e;
            den += std::norm(gz);
            r.sup = std::max(r.sup, e);
            r.gz_sup = std::max(r.gz_sup, std::abs(gz));
            r.min_jacobian = std::min(r.min_jacobian, std::norm(gz) - std::norm(gzb));
        }
    r.l2 = den > 0 ? std::sqrt(num / den) : 0;
    return r;
}

/// Quasiconformal map sampled at grid cell centres, evaluated by bilinear
/// interpolation. An empty grid stands for the identity.
struct QCMap {
    GridField values;
    GridField density;  // G_zbar of the principal solution
    NeumannHistory history;
    GridResidual residual;
    std::string normalization = "identity";
    double circle_deviation = 0;
    bool truncated = false;  // coefficient reached the outermost cells
    std::function<Complex(Complex)> eval;  // overrides interpolation when set

    static QCMap identity() { return {}; }
    bool is_identity() const { return values.n() == 0; }

    Complex operator()(Complex w) const {
        if (eval) return eval(w);
        return is_identity() ? w : values.interpolate(w);
    }

    /// Newton iteration with the finite-difference Jacobian of the interpolant.
    Complex inverse(Complex z) const {
        if (is_identity()) return z;
        Complex w = z;
        const double d = 0.25 * values.spacing();
        for (int it = 0; it < 100; ++it) {
            const Complex F = (*this)(w) - z;
            if (std::abs(F) < 1e-13) return w;
            const Complex gx = ((*this)(w + d) - (*this)(w - d)) / (2 * d);
            const Complex gy = ((*this)(w + I * d) - (*this)(w - I * d)) / (2 * d);
            const Complex gz = 0.5 * (gx - I * gy), gzb = 0.5 * (gx + I * gy);
            const double J = std::norm(gz) - std::norm(gzb);
            if (!(J > 0)) throw ConvergenceError("qc_map", "Jacobian not positive during inversion");
            const Complex dw = (std::conj(gz) * F - gzb * std::conj(F)) / J;
            w -= dw;
            if (std::abs(dw) < 1e-13) return w;
        }
        throw ConvergenceError("qc_map", "Newton inversion did not converge");
    }
};

struct BeltramiOptions {
    std::size_t grid = 1024;
    double extent = 8;
    double tol = 1e-8;  // relative increment stop
    int max_iter = 200;
    int supersample = 2;
};

/// G(w) = w + C h with h = mu S h + mu, solved by Neumann iteration.
inline QCMap principal_solution(const BeltramiCoefficient& mu, const BeltramiOptions& opt = {}) {
    BeltramiCoefficient::check(mu.k);
    const std::size_t n = opt.grid;
    const double L = opt.extent;
    QCMap G;
    G.normalization = "principal";
    GridField m = mu.is_zero() ? GridField(n, L) : GridField::sample(mu.fn, n, L, opt.supersample);
    if (!(m.sup_norm() < 1)) throw InputError("beltrami", "degenerate coefficient on the grid");
    G.truncated = m.touches_boundary();
    GridField h = m;
    if (!mu.is_zero()) {
        GridConvolution S(n, L, GridConvolution::Kind::Beurling);
        const double scale = std::max(m.l2_norm(), 1e-300);
        double prev = 0;
        for (int it = 1;; ++it) {
            GridField next = m * S.apply(h);
            next += m;
            const double inc = (next - h).l2_norm();
            h = std::move(next);
            G.history.increments.push_back(inc);
            G.history.iterations = it;
            if (prev > 1e-13 * scale && inc > 1e-13 * scale) {
                const double ratio = inc / prev;
                G.history.contraction = std::max(G.history.contraction, ratio);
                if (ratio >= 1)
                    throw ResolutionError("beltrami", "Neumann iteration does not contract (k(1+eps) >= 1); refine the grid");
            }
            prev = inc;
            if (inc <= opt.tol * scale) break;
            if (it >= opt.max_iter) throw ConvergenceError("beltrami", "Neumann iteration exceeded max_iter");
        }
    }
    GridConvolution C(n, L, GridConvolution::Kind::Cauchy);
    G.values = C.apply(h);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) G.values(i, j) += G.values.point(i, j);
    G.density = std::move(h);
    G.residual = grid_beltrami_residual(G.values, m);
    return G;
}

/// Extension of nu from the disk by nu(w) = conj(nu(1/conj w)) w^2 / conj(w)^2, |w| > 1.
inline BeltramiCoefficient reflect_coefficient(const BeltramiCoefficient& nu, double radius) {
    if (nu.is_zero()) return nu;
    auto f = nu.fn;
    return BeltramiCoefficient::from_function(
        [f, radius](Complex w) -> Complex {
            const double r = std::abs(w);
            if (r < 1) return f(w);
            if (r > radius) return 0.0;
            const Complex wb = std::conj(w);
            return std::conj(f(1.0 / wb)) * (w * w) / (wb * wb);
        },
        nu.k, "reflected-" + nu.kind);
}

/// G: D -> D quasiconformal with dilatation nu, G(0) = 0, G(1) = 1.
/// F = principal solution for the reflected coefficient; its image of the
/// disk is only a near-disk (the coefficient is cut off at the grid extent),
/// so G = rotation o psi o F with psi: F(D) -> D conformal, which leaves the
/// dilatation unchanged. Outside the disk G is the reflection of G inside.
/// Grid values are filled for |w| <= 1.25 only.
inline QCMap disk_normalized_qc(const BeltramiCoefficient& nu, const BeltramiOptions& opt = {},
                                double circle_tol = 1e-3, int map_modes = 256) {
    if (nu.is_zero()) return QCMap::identity();
    const auto tilde = reflect_coefficient(nu, opt.extent);
    QCMap G = principal_solution(tilde, opt);
    auto Fv = std::make_shared<GridField>(G.values);
    auto image = JordanCurve::from_function(
        [Fv](double s) { return Fv->interpolate(std::polar(1.0, two_pi * s)); }, 4096, "qc-image");
    auto psi = std::make_shared<ConformalMap>(
        theodorsen_map(PlanarDomain(image, Fv->interpolate(0.0), "qc-image"), {map_modes, 1e-10, 5000}));
    const Complex w1 = psi->forward(Fv->interpolate(1.0));
    const Complex rot = std::conj(w1) / std::abs(w1);
    auto inner = [Fv, psi, rot](Complex w) { return rot * psi->forward(Fv->interpolate(w)); };
    G.eval = [inner](Complex w) {
        if (std::norm(w) <= 1) return inner(w);
        return 1.0 / std::conj(inner(1.0 / std::conj(w)));
    };
    G.normalization = "G(0)=0, G(1)=1";
    const std::size_t n = G.values.n();
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const Complex w = G.values.point(i, j);
            G.values(i, j) = std::abs(w) <= 1.25 ? G.eval(w) : Complex(0.0);
        }
    G.residual = grid_beltrami_residual(G.values, GridField::sample(tilde.fn, n, G.values.extent(), opt.supersample),
                                        4, [](Complex w) { return std::norm(w) < 1; });
    for (int k = 0; k < 1024; ++k)
        G.circle_deviation = std::max(G.circle_deviation, std::abs(std::abs(G(std::polar(1.0, two_pi * k / 1024))) - 1));
    if (G.circle_deviation > circle_tol)
        throw ResolutionError("beltrami", "unit circle not preserved (deviation " + std::to_string(G.circle_deviation) +
                                              "); refine the grid");
    return G;
}

/// nu = (mu g'/conj(g')) o g^-1 on the disk.
inline BeltramiCoefficient pushforward_coefficient(const BeltramiCoefficient& mu, const ConformalMap& g) {
    if (mu.is_zero()) return mu;
    if (g.method() == "identity") return mu;
    auto gp = std::make_shared<ConformalMap>(g);
    auto f = mu.fn;
    return BeltramiCoefficient::from_function(
        [gp, f](Complex w) -> Complex {
            if (std::abs(w) >= 1) return 0.0;
            // g'(z) = 1/(g^-1)'(w)
            const Complex d = gp->inverse_derivative(w);
            return f(gp->inverse(w)) * std::conj(d) / d;
        },
        mu.k, "pushforward");
}

/// Boundary map t -> arg G(e^{it}) tabulated and inverted by linear interpolation.
class CircleMap {
public:
    CircleMap() = default;
    explicit CircleMap(const QCMap& G, std::size_t K = 8192) {
        if (G.is_identity()) return;
        t_.resize(K + 1);
        u_.resize(K + 1);
        double prev = 0;
        for (std::size_t k = 0; k <= K; ++k) {
            t_[k] = two_pi * k / K;
            const double a = std::arg(G(std::polar(1.0, t_[k])));
            u_[k] = k == 0 ? a : u_[k - 1] + wrap_angle(a - prev);
            prev = a;
            if (k > 0 && !(u_[k] > u_[k - 1]))
                throw ResolutionError("beltrami", "boundary map of G is not monotone at this resolution");
        }
        if (std::abs(u_[K] - u_[0] - two_pi) > 1e-6) throw ResolutionError("beltrami", "boundary map of G has wrong degree");
    }
    double operator()(double t) const { return identity() ? t : lookup(t_, u_, t); }
    double inverse(double u) const { return identity() ? u : lookup(u_, t_, u); }
    bool identity() const { return t_.empty(); }

private:
    static double lookup(const std::vector<double>& x, const std::vector<double>& y, double v) {
        const double x0 = x.front();
        const double off = std::floor((v - x0) / two_pi);
        v -= off * two_pi;
        auto it = std::upper_bound(x.begin(), x.end(), v);
        const std::size_t j = std::clamp<std::size_t>(it - x.begin(), 1, x.size() - 1);
        const double a = (v - x[j - 1]) / (x[j] - x[j - 1]);
        return y[j - 1] + a * (y[j] - y[j - 1]) + off * two_pi;
    }
    std::vector<double> t_, u_;
};

struct PipelineOptions {
    BeltramiOptions beltrami;
    int modes = 1024;
    double aperture = default_aperture;
    int band = 4;
    double circle_tol = 1e-3;
    double residual_tol = 1e-2;
    std::size_t stride = 4;  // Beltrami residual stencil, in grid cells
    std::vector<double> phi_exceptional;
    std::vector<double> radii = default_radii();
};

struct PipelineReport {
    double beltrami_sup = 0;
    double fz_sup = 0;
    double beltrami_ratio = 0;  // beltrami_sup / fz_sup
    std::size_t beltrami_points = 0;
    AngularLimitReport boundary;
    double circle_deviation = 0;
    double contraction = 0;
    int iterations = 0;
    std::vector<double> exceptional;  // parameters on the boundary of D
    bool pass = false;
};

/// f = A o G o g with g: D -> disk conformal, G the disk-normalised solution
/// for the pushed-forward coefficient and A the disk Hilbert solution for the
/// transported data.
struct RegularSolution {
    std::shared_ptr<const ConformalMap> g;
    BeltramiCoefficient mu, nu;
    QCMap G;
    CircleMap Gstar;
    HilbertSolution A;
    PipelineReport report;

    /// h = G o g, clamped to the closed disk.
    Complex h(Complex z) const {
        Complex w = G(g->forward(z));
        const double r = std::abs(w);
        if (r > 1) w /= r;
        return w;
    }
    Complex operator()(Complex z) const { return A.f(h(z)); }
    /// Disk angle of h_*(s).
    double hstar(double s) const { return Gstar(g->boundary_angle(s)); }
    double hstar_inverse(double u) const { return g->boundary_param(Gstar.inverse(u)); }
};

namespace detail {

inline std::vector<Complex> interior_lattice(const PlanarDomain& D, double spacing, double margin) {
    const auto [lo, hi] = D.boundary().bounding_box();
    std::vector<Complex> pts;
    for (double y = std::ceil(lo.imag() / spacing) * spacing; y <= hi.imag(); y += spacing)
        for (double x = std::ceil(lo.real() / spacing) * spacing; x <= hi.real(); x += spacing) {
            const Complex z(x, y);
            if (D.contains(z) && D.boundary().distance(z) >= margin) pts.push_back(z);
        }
    return pts;
}

}  // namespace detail

inline RegularSolution assemble_regular_solution(const PlanarDomain& D, const BeltramiCoefficient& mu,
                                                 const ConformalMap& g, const BoundaryFunction& lambda,
                                                 const ArcPartition& partition, const BoundaryFunction& phi,
                                                 const PipelineOptions& opt = {}) {
    RegularSolution sol;
    sol.g = std::make_shared<ConformalMap>(g);
    sol.mu = mu;
    sol.nu = pushforward_coefficient(mu, g);
    sol.G = disk_normalized_qc(sol.nu, opt.beltrami, opt.circle_tol);
    sol.Gstar = CircleMap(sol.G);
    const auto& S = sol;

    // transported boundary data on the disk parameter u = h_*(s) / 2 pi
    const auto s_of = [&S](double u) { return S.hstar_inverse(two_pi * u); };
    const auto u_of = [&S](double s) { return wrap_unit(S.hstar(s) / two_pi); };
    std::vector<double> breaks;
    for (double e : partition.exceptional()) breaks.push_back(u_of(e));
    const ArcPartition part = partition.closed_circle() ? ArcPartition::circle() : ArcPartition::from_breaks(breaks);
    const std::size_t M = 2 * static_cast<std::size_t>(opt.modes) + 1;
    const auto nodes = equispaced_nodes(M);
    auto lam_eval = [lambda, s_of](double u) { return lambda(s_of(u)); };
    auto phi_eval = [phi, s_of](double u) { return phi(s_of(u)); };
    std::vector<Complex> lv(M), pv(M);
    for (std::size_t j = 0; j < M; ++j) {
        lv[j] = part.is_exceptional(nodes[j]) ? Complex(1.0) : lam_eval(nodes[j]);
        pv[j] = phi_eval(nodes[j]);
    }
    BoundaryFunction Lam(nodes, lv, nullptr, lam_eval), Phi(nodes, pv, nullptr, phi_eval);
    HilbertOptions hopt;
    hopt.N = opt.modes;
    hopt.aperture = opt.aperture;
    hopt.tol = opt.residual_tol;
    hopt.band = opt.band;
    hopt.radii = opt.radii;
    for (double e : opt.phi_exceptional) hopt.phi_exceptional.push_back(u_of(e));
    sol.A = solve_hilbert_disk(certify_cbv(Lam, part), Phi, hopt);

    auto& rep = sol.report;
    rep.circle_deviation = sol.G.circle_deviation;
    rep.contraction = sol.G.history.contraction;
    rep.iterations = sol.G.history.iterations;

    // exceptional points of A back on the boundary of D
    std::vector<double> exc_u = sol.A.beta.exceptional;
    exc_u.insert(exc_u.end(), hopt.phi_exceptional.begin(), hopt.phi_exceptional.end());
    for (double e : exc_u) rep.exceptional.push_back(wrap_unit(s_of(e)));
    std::sort(rep.exceptional.begin(), rep.exceptional.end());

    // (i) Beltrami residual of f on an interior lattice
    const double hg = sol.G.is_identity() ? 1.0 / 64 : sol.G.values.spacing();
    const double delta = static_cast<double>(opt.stride) * hg;
    const auto pts = detail::interior_lattice(D, delta, 2 * delta);
    for (const auto& z : pts) {
        const Complex fx = (S(z + delta) - S(z - delta)) / (2 * delta);
        const Complex fy = (S(z + I * delta) - S(z - I * delta)) / (2 * delta);
        const Complex fz = 0.5 * (fx - I * fy), fzb = 0.5 * (fx + I * fy);
        rep.beltrami_sup = std::max(rep.beltrami_sup, std::abs(fzb - mu(z) * fz));
        rep.fz_sup = std::max(rep.fz_sup, std::abs(fz));
    }
    rep.beltrami_points = pts.size();
    rep.beltrami_ratio = rep.fz_sup > 0 ? rep.beltrami_sup / rep.fz_sup : rep.beltrami_sup;

    // (ii) boundary residual along nontangential rays at the nodes of D
    auto& B = rep.boundary;
    B.tolerance = opt.residual_tol;
    B.params = nodes;
    B.limits.assign(M, std::nan(""));
    B.residuals.assign(M, std::nan(""));
    B.converged.assign(M, false);
    const double band = static_cast<double>(opt.band) / opt.modes;
    const auto& curve = D.boundary();
    for (std::size_t j = 0; j < M; ++j) {
        const double s = nodes[j];
        const double u = u_of(s);
        bool exc = partition.is_exceptional(s), near = false;
        for (double e : exc_u) {
            const double d = detail::cyc_dist(u, e);
            if (d < 1e-12) exc = true;
            if (d <= band + 1e-12) near = true;
        }
        if (exc) {
            B.exceptional.push_back(j);
            continue;
        }
        if (near) {
            B.excluded.push_back(j);
            continue;
        }
        const Complex zeta = curve.point(s);
        const auto tan = curve.tangent_at(s);
        if (!tan) {
            B.excluded.push_back(j);
            continue;
        }
        const Complex cl = std::conj(lambda(s));
        const double target = phi(s).real();
        const auto q = [&S, cl](Complex z) { return Complex((cl * S(z)).real()); };
        AngularLimit lim;
        try {
            lim = angular_limit(q, zeta, I * *tan, opt.aperture, opt.radii, opt.residual_tol);
        } catch (const Error&) {
            lim.value = std::nan("");
        }
        const double res = std::abs(lim.value.real() - target);
        B.limits[j] = lim.value.real();
        B.residuals[j] = res;
        B.converged[j] = lim.converged;
        B.max_residual = std::max(B.max_residual, std::isfinite(res) ? res : std::numeric_limits<double>::infinity());
        ++B.verified;
        if (!(res <= opt.residual_tol) || !lim.converged) ++B.failed;
    }
    B.pass = B.failed == 0;
    rep.pass = B.pass && rep.beltrami_ratio <= opt.residual_tol;
    return sol;
}

struct StoilowReport {
    double max_mismatch = 0;     // |f - A o h| on the samples
    bool consistent = false;     // mismatch <= 1e-9
    double min_jacobian = 0;     // finite-difference |h_z|^2 - |h_zbar|^2
    bool locally_injective = false;
    std::size_t samples = 0;
};

/// Checks f = A o h on samples and positivity of the Jacobian of h.
inline StoilowReport stoilow_report(const std::function<Complex(Complex)>& f, const AnalyticDiskFunction& A,
                                    const std::function<Complex(Complex)>& h, const std::vector<Complex>& samples,
                                    double delta = 1e-3) {
    StoilowReport r;
    r.min_jacobian = std::numeric_limits<double>::infinity();
    for (const auto& z : samples) {
        r.max_mismatch = std::max(r.max_mismatch, std::abs(f(z) - A(h(z))));
        const Complex hx = (h(z + delta) - h(z - delta)) / (2 * delta);
        const Complex hy = (h(z + I * delta) - h(z - I * delta)) / (2 * delta);
        const Complex hz = 0.5 * (hx - I * hy), hzb = 0.5 * (hx + I * hy);
        r.min_jacobian = std::min(r.min_jacobian, std::norm(hz) - std::norm(hzb));
    }
    r.samples = samples.size();
    r.consistent = r.max_mismatch <= 1e-9;
    r.locally_injective = r.min_jacobian > 0;
    return r;
}

inline StoilowReport stoilow_report(const RegularSolution& sol, const std::vector<Complex>& samples) {
    return stoilow_report([&sol](Complex z) { return sol(z); }, sol.A.f, [&sol](Complex z) { return sol.h(z); },
                          samples);
}

}  // namespace qcbvp
