#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qcbvp/beltrami.hpp"
#include "qcbvp/boundary_data.hpp"
#include "qcbvp/conformal.hpp"
#include "qcbvp/core.hpp"
#include "qcbvp/disk_analytic.hpp"

namespace qcbvp {

// ---------------------------------------------------------------------------
// mu <-> A(z)

struct Mat2 {
    double a11 = 1, a12 = 0, a21 = 0, a22 = 1;
    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }
    bool symmetric(double tol = 1e-9) const { return std::abs(a12 - a21) <= tol; }
    /// Smallest eigenvalue of the symmetric part.
    double min_eig() const {
        const double b = 0.5 * (a12 + a21), t = trace(), d = a11 * a22 - b * b;
        return 0.5 * (t - std::sqrt(std::max(0.0, t * t - 4 * d)));
    }
    double max_abs() const { return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)}); }
};

inline double dilatation_bound(Complex mu) {
    const double m = std::abs(mu);
    if (!(m < 1)) throw InputError("dilatation_bound", "degenerate coefficient: |mu| >= 1");
    return (1 + m) / (1 - m);
}

inline Mat2 matrix_from_mu(Complex mu) {
    const double m2 = std::norm(mu);
    if (!(m2 < 1)) throw InputError("matrix_from_mu", "degenerate coefficient: |mu| >= 1");
    const double d = 1 - m2;
    const double off = -2 * mu.imag() / d;
    return {std::norm(1.0 - mu) / d, off, off, std::norm(1.0 + mu) / d};
}

inline Complex mu_from_matrix(const Mat2& A) {
    if (!A.symmetric()) throw InputError("mu_from_matrix", "matrix is not symmetric");
    if (std::abs(A.det() - 1) > 1e-9) throw InputError("mu_from_matrix", "det A != 1");
    if (!(A.min_eig() > 0)) throw InputError("mu_from_matrix", "matrix is not elliptic");
    return Complex(A.a22 - A.a11, -2 * A.a21) / (1 + A.trace() + A.det());
}

/// Symmetric det-1 matrix field with sup |mu| = k < 1.
struct EllipticMatrix {
    std::function<Mat2(Complex)> fn;
    double k = 0;
    std::string kind = "identity";

    Mat2 operator()(Complex z) const { return fn ? fn(z) : Mat2{}; }

    static EllipticMatrix constant(const Mat2& A) {
        EllipticMatrix m;
        m.k = std::abs(mu_from_matrix(A));
        m.kind = "constant";
        m.fn = [A](Complex) { return A; };
        return m;
    }
    static EllipticMatrix from_mu(const BeltramiCoefficient& mu) {
        EllipticMatrix m;
        m.k = mu.k;
        m.kind = "from-mu";
        if (!mu.is_zero()) m.fn = [f = mu.fn](Complex z) { return matrix_from_mu(f(z)); };
        return m;
    }
    /// k is the sampled sup over `samples`, where the invariants are also checked.
    static EllipticMatrix from_function(std::function<Mat2(Complex)> f, const std::vector<Complex>& samples) {
        EllipticMatrix m;
        m.kind = "function";
        for (const auto& z : samples) m.k = std::max(m.k, std::abs(mu_from_matrix(f(z))));
        BeltramiCoefficient::check(m.k);
        m.fn = std::move(f);
        return m;
    }

    BeltramiCoefficient mu() const {
        if (!fn || k == 0) return BeltramiCoefficient::zero();
        return BeltramiCoefficient::from_function([f = fn](Complex z) { return mu_from_matrix(f(z)); }, k, "matrix");
    }
};

// ---------------------------------------------------------------------------
// Solution fields and limit tables

struct LimitTable {
    std::string name;
    std::vector<double> params, limits, targets, residuals;  // NaN where not verified
    std::vector<bool> converged;
    std::vector<std::size_t> exceptional, excluded;
    double tolerance = 0;
    double required = 1;  // fraction of verified nodes that must pass
    double max_residual = 0;
    std::size_t verified = 0, failed = 0;
    bool pass = false;

    double pass_fraction() const { return verified ? 1.0 - static_cast<double>(failed) / verified : 1.0; }
    void finish() { pass = verified > 0 ? pass_fraction() >= required : true; }
};

inline LimitTable to_table(const AngularLimitReport& r, std::string name, const BoundaryFunction& target) {
    LimitTable t;
    t.name = std::move(name);
    t.params = r.params;
    t.limits = r.limits;
    t.residuals = r.residuals;
    t.converged = r.converged;
    t.exceptional = r.exceptional;
    t.excluded = r.excluded;
    t.tolerance = r.tolerance;
    t.max_residual = r.max_residual;
    t.verified = r.verified;
    t.failed = r.failed;
    t.targets.resize(r.params.size());
    for (std::size_t j = 0; j < r.params.size(); ++j) t.targets[j] = target(r.params[j]).real();
    t.finish();
    return t;
}

struct SolutionField {
    std::string kind;
    std::function<Complex(Complex)> F;  // u = Re F
    std::function<Complex(Complex)> f;  // F' for the directional problems, F itself otherwise
    std::vector<LimitTable> tables;
    std::vector<double> exceptional;  // boundary parameters
    double operator_residual = 0;     // sup |div A grad u| on the interior lattice
    std::size_t operator_points = 0;
    double flux = 0;                  // integral of phi ds, Neumann compatibility diagnostic
    bool pass = false;

    double u(Complex z) const { return F(z).real(); }
    const LimitTable* table(const std::string& name) const {
        for (const auto& t : tables)
            if (t.name == name) return &t;
        return nullptr;
    }
};

struct FrontendOptions {
    int modes = 1024;
    double aperture = default_aperture;
    int band = 4;
    double residual_tol = 1e-6;
    double required = 1;  // pass fraction for the limit tables
    BeltramiOptions beltrami;
    std::size_t stride = 4;
    int map_modes = 4096;  // Theodorsen modes for the image domain of the A-harmonic transport
    std::vector<double> radii = default_radii();
};

namespace detail {

/// Taylor coefficients 0..N of psi = g^-1 from its boundary values.
inline std::vector<Complex> inverse_map_series(const ConformalMap& g, int N) {
    if (g.method() == "identity") return {0.0, 1.0};
    std::size_t M = 64;
    while (M < 4 * static_cast<std::size_t>(N)) M *= 2;
    std::vector<Complex> v(M);
    for (std::size_t j = 0; j < M; ++j) v[j] = g.inverse(std::polar(1.0, two_pi * j / M));
    auto c = dft_forward(v);
    c.resize(static_cast<std::size_t>(N) + 1);
    return c;
}

inline double winding(const std::vector<Complex>& v) {
    double s = 0;
    for (std::size_t j = 0; j < v.size(); ++j) s += wrap_angle(std::arg(v[(j + 1) % v.size()] / v[j]));
    return s / two_pi;
}

/// Which nodes to skip: exceptional points (in s) and the band around
/// exceptional points of the disk solution (in u).
struct NodeMask {
    std::vector<double> nodes;
    std::vector<bool> exceptional, excluded;
};

inline NodeMask node_mask(std::size_t M, const ArcPartition& part, const std::vector<double>& exc, double band) {
    NodeMask m;
    m.nodes = equispaced_nodes(M);
    m.exceptional.assign(M, false);
    m.excluded.assign(M, false);
    for (std::size_t j = 0; j < M; ++j) {
        const double s = m.nodes[j];
        m.exceptional[j] = part.is_exceptional(s);
        for (double e : exc) {
            const double d = cyc_dist(s, e);
            if (d < 1e-12) m.exceptional[j] = true;
            if (d <= band + 1e-12) m.excluded[j] = true;
        }
    }
    return m;
}

using NodeCheck = std::function<AngularLimit(std::size_t j, double s, Complex zeta, Complex inward)>;

inline LimitTable build_table(std::string name, const PlanarDomain& D, const NodeMask& mask, const NodeCheck& check,
                              const std::function<double(double)>& target, double tol, double required) {
    LimitTable t;
    t.name = std::move(name);
    t.tolerance = tol;
    t.required = required;
    const std::size_t M = mask.nodes.size();
    t.params = mask.nodes;
    t.limits.assign(M, std::nan(""));
    t.targets.assign(M, std::nan(""));
    t.residuals.assign(M, std::nan(""));
    t.converged.assign(M, false);
    const auto& curve = D.boundary();
    for (std::size_t j = 0; j < M; ++j) {
        const double s = mask.nodes[j];
        if (mask.exceptional[j]) {
            t.exceptional.push_back(j);
            continue;
        }
        const auto tan = curve.tangent_at(s);
        if (mask.excluded[j] || !tan) {
            t.excluded.push_back(j);
            continue;
        }
        AngularLimit lim;
        try {
            lim = check(j, s, curve.point(s), I * *tan);
        } catch (const Error&) {
            lim.value = std::nan("");
        }
        const double tg = target(s);
        const double res = std::abs(lim.value.real() - tg);
        t.limits[j] = lim.value.real();
        t.targets[j] = tg;
        t.residuals[j] = res;
        t.converged[j] = lim.converged;
        t.max_residual = std::max(t.max_residual, std::isfinite(res) ? res : std::numeric_limits<double>::infinity());
        ++t.verified;
        if (!(res <= tol) || !lim.converged) ++t.failed;
    }
    t.finish();
    return t;
}

/// Centered-difference gradient u_x + i u_y.
inline Complex fd_gradient(const std::function<double(Complex)>& u, Complex z, double d) {
    return Complex((u(z + d) - u(z - d)) / (2 * d), (u(z + I * d) - u(z - I * d)) / (2 * d));
}

/// <v, grad u> as z approaches zeta within the cone; the difference step
/// shrinks with the distance to zeta.
inline AngularLimit directional_limit(const std::function<double(Complex)>& u, Complex v, Complex zeta, Complex inward,
                                      double aperture, double tol, const std::vector<double>& radii = default_radii()) {
    const auto q = [&u, v, zeta](Complex z) {
        const Complex g = fd_gradient(u, z, std::abs(z - zeta) / 8);
        return Complex((std::conj(v) * g).real());
    };
    return angular_limit(q, zeta, inward, aperture, radii, tol);
}

/// sup |div A grad u| over the points, second differences at spacing d.
inline double operator_residual(const std::function<double(Complex)>& u, const EllipticMatrix& A,
                                const std::vector<Complex>& pts, double d) {
    auto flux = [&](Complex z) {
        const Complex g = fd_gradient(u, z, d);
        const Mat2 a = A(z);
        return Complex(a.a11 * g.real() + a.a12 * g.imag(), a.a21 * g.real() + a.a22 * g.imag());
    };
    double r = 0;
    for (const auto& z : pts) {
        const double div = (flux(z + d).real() - flux(z - d).real()) / (2 * d) +
                           (flux(z + I * d).imag() - flux(z - I * d).imag()) / (2 * d);
        r = std::max(r, std::abs(div));
    }
    return r;
}

inline double boundary_integral(const PlanarDomain& D, const BoundaryFunction& phi, std::size_t n = 4096) {
    double s = 0;
    const auto& c = D.boundary();
    for (std::size_t j = 0; j < n; ++j) {
        const double a = static_cast<double>(j) / n, b = static_cast<double>(j + 1) / n;
        s += phi(0.5 * (a + b)).real() * std::abs(c.point(b) - c.point(a));
    }
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dirichlet

/// u = Re f with f the regular solution for lambda = 1 (harmonic when mu is
/// absent, A-harmonic for A = matrix_from_mu(mu) otherwise).
inline SolutionField solve_dirichlet(const PlanarDomain& D, const ConformalMap& g, const BoundaryFunction& phi,
                                     const ArcPartition& partition, const std::optional<BeltramiCoefficient>& mu = {},
                                     const FrontendOptions& opt = {}) {
    PipelineOptions po;
    po.beltrami = opt.beltrami;
    po.modes = opt.modes;
    po.aperture = opt.aperture;
    po.band = opt.band;
    po.residual_tol = opt.residual_tol;
    po.stride = opt.stride;
    po.radii = opt.radii;
    for (double e : partition.exceptional()) po.phi_exceptional.push_back(e);
    const auto m = mu.value_or(BeltramiCoefficient::zero());
    auto sol = std::make_shared<RegularSolution>(assemble_regular_solution(
        D, m, g, BoundaryFunction::sample([](double) { return Complex(1.0); }, 1), ArcPartition::circle(), phi, po));
    SolutionField out;
    out.kind = "dirichlet";
    out.F = [sol](Complex z) { return (*sol)(z); };
    out.f = out.F;
    auto t = to_table(sol->report.boundary, "boundary", phi);
    t.required = opt.required;
    t.finish();
    out.tables.push_back(std::move(t));
    out.exceptional = sol->report.exceptional;
    const double d = m.is_zero() ? 1.0 / 64 : static_cast<double>(opt.stride) * sol->G.values.spacing();
    const auto pts = detail::interior_lattice(D, std::max(d, 1.0 / 32), 3 * d);
    out.operator_residual = detail::operator_residual([&out](Complex z) { return out.u(z); }, EllipticMatrix::from_mu(m),
                                                      pts, d);
    out.operator_points = pts.size();
    out.pass = out.tables[0].pass && (m.is_zero() || sol->report.beltrami_ratio <= opt.residual_tol ||
                                      sol->report.beltrami_ratio <= 1e-2);
    return out;
}

// ---------------------------------------------------------------------------
// Directional derivative problems

namespace detail {

struct DirectionalCore {
    std::shared_ptr<const ConformalMap> g;
    HilbertSolution disk;
    AnalyticDiskFunction Fw;  // F o g^-1 on the disk
    std::vector<double> exc_u;
    ArcPartition partition;   // on D, with a break added when conj(nu) winds
};

/// Re[nu f] = phi on the boundary of D, f = F', F(z0) = 0.
inline DirectionalCore directional_core(const ConformalMap& g, const BoundaryFunction& nu, const BoundaryFunction& phi,
                                        ArcPartition partition, const FrontendOptions& opt) {
    DirectionalCore c;
    c.g = std::make_shared<ConformalMap>(g);
    const auto gp = c.g;
    const auto s_of = [gp](double u) { return gp->boundary_param(two_pi * u); };
    const auto u_of = [gp](double s) { return wrap_unit(gp->boundary_angle(s) / two_pi); };
    const std::size_t M = 2 * static_cast<std::size_t>(opt.modes) + 1;
    const auto nodes = equispaced_nodes(M);
    auto lam_eval = [nu, s_of](double u) {
        const Complex v = nu(s_of(u));
        if (!(std::abs(std::abs(v) - 1) <= unimodular_tol)) throw InputError("directional", "direction field is not unimodular");
        return std::conj(v);
    };
    auto phi_eval = [phi, s_of](double u) { return phi(s_of(u)); };
    std::vector<Complex> lv(M), pv(M);
    for (std::size_t j = 0; j < M; ++j) {
        lv[j] = lam_eval(nodes[j]);
        pv[j] = phi_eval(nodes[j]);
    }
    if (partition.closed_circle() && std::abs(detail::winding(lv)) > 0.5) {
        // break where lambda turns slowest
        std::size_t best = 0;
        double slope = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < M; ++j) {
            const double d = std::abs(lv[(j + 1) % M] - lv[(j + M - 1) % M]);
            if (d < slope) slope = d, best = j;
        }
        partition = ArcPartition::from_breaks({wrap_unit(s_of(nodes[best]))});
    }
    c.partition = partition;
    std::vector<double> breaks;
    for (double e : partition.exceptional()) breaks.push_back(u_of(e));
    const ArcPartition part = partition.closed_circle() ? ArcPartition::circle() : ArcPartition::from_breaks(breaks);
    for (std::size_t j = 0; j < M; ++j)
        if (part.is_exceptional(nodes[j])) lv[j] = 1.0;
    BoundaryFunction Lam(nodes, lv, nullptr, [lam_eval, part](double u) {
        return part.is_exceptional(u) ? Complex(1.0) : lam_eval(u);
    });
    BoundaryFunction Phi(nodes, pv, nullptr, phi_eval);
    HilbertOptions hopt;
    hopt.N = opt.modes;
    hopt.aperture = opt.aperture;
    hopt.tol = opt.residual_tol;
    hopt.band = opt.band;
    hopt.radii = opt.radii;
    c.disk = solve_hilbert_disk(certify_cbv(Lam, part), Phi, hopt);
    c.exc_u = c.disk.beta.exceptional;
    if (g.method() == "identity") {
        c.Fw = antiderivative(c.disk.f);
    } else {
        // F o psi has derivative (f o psi) psi'
        AnalyticDiskFunction psi(inverse_map_series(g, opt.modes));
        const auto dpsi = psi.series_derivative();
        AnalyticDiskFunction prod(series_product(c.disk.f.taylor, dpsi.taylor, opt.modes));
        prod.factors = c.disk.f.factors;
        c.Fw = antiderivative(prod);
    }
    return c;
}

inline double clamp_disk(Complex& w) {
    const double r = std::abs(w);
    if (r > 1) w /= r;
    return r;
}

}  // namespace detail

/// Directional solve: Re[nu f] = phi, u = Re F with F' = f, so that
/// <nu, grad u> -> phi. Limit tables: "derivative" (angular limit of the
/// finite-difference directional derivative).
inline SolutionField solve_directional(const PlanarDomain& D, const ConformalMap& g, const BoundaryFunction& nu,
                                       const BoundaryFunction& phi, const ArcPartition& partition = ArcPartition::circle(),
                                       const FrontendOptions& opt = {}) {
    auto core = std::make_shared<detail::DirectionalCore>(detail::directional_core(g, nu, phi, partition, opt));
    SolutionField out;
    out.kind = "directional";
    out.F = [core](Complex z) {
        Complex w = core->g->forward(z);
        detail::clamp_disk(w);
        return core->Fw(w);
    };
    out.f = [core](Complex z) {
        Complex w = core->g->forward(z);
        detail::clamp_disk(w);
        return core->disk.f(w);
    };
    const auto gp = core->g;
    const auto s_of = [gp](double u) { return wrap_unit(gp->boundary_param(two_pi * u)); };
    const std::size_t M = 2 * static_cast<std::size_t>(opt.modes) + 1;
    std::vector<double> exc_s;
    for (double e : core->exc_u) exc_s.push_back(s_of(e));
    const auto mask = detail::node_mask(M, core->partition, exc_s, static_cast<double>(opt.band) / opt.modes);
    const auto u = [F = out.F](Complex z) { return F(z).real(); };
    const double ap = opt.aperture, tol = opt.residual_tol;
    out.tables.push_back(detail::build_table(
        "derivative", D, mask,
        [&](std::size_t, double s, Complex zeta, Complex inward) {
            return detail::directional_limit(u, nu(s), zeta, inward, ap, tol, opt.radii);
        },
        [&phi](double s) { return phi(s).real(); }, tol, opt.required));
    for (double e : core->partition.exceptional()) out.exceptional.push_back(e);
    for (double e : core->exc_u) out.exceptional.push_back(s_of(e));
    std::sort(out.exceptional.begin(), out.exceptional.end());
    out.exceptional.erase(std::unique(out.exceptional.begin(), out.exceptional.end(),
                                      [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                          out.exceptional.end());
    const auto pts = detail::interior_lattice(D, 1.0 / 32, 3.0 / 64);
    out.operator_residual = detail::operator_residual(u, EllipticMatrix{}, pts, 1.0 / 64);
    out.operator_points = pts.size();
    out.pass = out.tables[0].pass;
    return out;
}

/// Interior normal field of D as a boundary function.
inline BoundaryFunction interior_normal(const PlanarDomain& D, std::size_t samples = 4096) {
    auto curve = std::make_shared<JordanCurve>(D.boundary());
    return BoundaryFunction::sample(
        [curve](double s) {
            const auto t = curve->tangent_at(s);
            if (!t) throw DomainError("interior_normal", "no tangent at s = " + std::to_string(s));
            return I * *t;
        },
        samples);
}

/// Directional solve with nu = n plus the finite-limit checks: "normal_limit"
/// (u along the normal line), "normal_derivative" (one-sided difference
/// quotients at the boundary) and "derivative" (angular limit of <n, grad u>).
inline SolutionField solve_neumann(const PlanarDomain& D, const ConformalMap& g, const BoundaryFunction& phi,
                                   const ArcPartition& partition = ArcPartition::circle(), const FrontendOptions& opt = {}) {
    const auto n = interior_normal(D);
    SolutionField out = solve_directional(D, g, n, phi, partition, opt);
    out.kind = "neumann";
    out.flux = detail::boundary_integral(D, phi);
    const auto& deriv = out.tables[0];
    detail::NodeMask mask;
    mask.nodes = deriv.params;
    mask.exceptional.assign(mask.nodes.size(), false);
    mask.excluded.assign(mask.nodes.size(), false);
    for (auto j : deriv.exceptional) mask.exceptional[j] = true;
    for (auto j : deriv.excluded) mask.excluded[j] = true;
    const auto u = [F = out.F](Complex z) { return F(z).real(); };
    const double tol = opt.residual_tol;
    std::vector<double> ub(mask.nodes.size(), std::nan(""));

    auto nl = detail::build_table(
        "normal_limit", D, mask,
        [&](std::size_t j, double, Complex zeta, Complex inward) {
            auto lim = angular_limit([&u](Complex z) { return Complex(u(z)); }, zeta, inward, 0.0, opt.radii, tol);
            ub[j] = lim.value.real();
            return lim;
        },
        [&ub](double) { return 0.0; }, tol, opt.required);
    // the target of the normal-limit table is the limit itself; residual is the extrapolation error
    nl.failed = 0;
    nl.max_residual = 0;
    for (std::size_t j = 0; j < nl.params.size(); ++j) {
        if (std::isnan(nl.residuals[j])) continue;
        nl.targets[j] = nl.limits[j];
        nl.residuals[j] = std::isfinite(nl.limits[j]) ? 0.0 : std::numeric_limits<double>::infinity();
        nl.max_residual = std::max(nl.max_residual, nl.residuals[j]);
        if (!nl.converged[j] || !std::isfinite(nl.limits[j])) ++nl.failed;
    }
    nl.finish();

    auto nd = detail::build_table(
        "normal_derivative", D, mask,
        [&](std::size_t j, double, Complex zeta, Complex inward) {
            inward /= std::abs(inward);
            auto radii = opt.radii;
            std::sort(radii.begin(), radii.end(), std::greater<>());
            if (radii.size() > 4) radii.erase(radii.begin(), radii.end() - 4);
            std::vector<Complex> q(radii.size());
            for (std::size_t i = 0; i < radii.size(); ++i) {
                const double t = radii[i];
                q[i] = (4 * u(zeta + t * inward) - u(zeta + 2 * t * inward) - 3 * ub[j]) / (2 * t);
            }
            const auto [v, err] = neville_at_zero(radii, q);
            AngularLimit lim;
            lim.value = v;
            lim.error = err;
            lim.converged = std::isfinite(v.real()) && err <= tol * std::max(1.0, std::abs(v));
            return lim;
        },
        [&phi](double s) { return phi(s).real(); }, tol, opt.required);

    out.tables = {nl, nd, deriv};
    out.pass = true;
    for (const auto& t : out.tables) out.pass = out.pass && t.pass;
    return out;
}

// ---------------------------------------------------------------------------
// Poincare form

struct PoincareProblemSpec {
    enum class Kind { Dirichlet, Directional, Neumann, Poincare };
    PlanarDomain domain = PlanarDomain::unit_disk();
    BoundaryFunction a, b, nu, phi;
    ArcPartition partition = ArcPartition::circle();
    Kind kind = Kind::Poincare;
};

/// a u + b du/dnu = phi, constructive case a = 0 only.
inline SolutionField solve_poincare(const PoincareProblemSpec& spec, const ConformalMap& g, const FrontendOptions& opt = {}) {
    const auto M = 4096;
    for (int j = 0; j < M; ++j) {
        const double s = static_cast<double>(j) / M;
        if (std::abs(spec.a(s)) > 1e-14)
            throw UnsupportedError("solve_poincare", "a != 0: no construction for the general Poincare problem");
    }
    const auto b = spec.b, phi = spec.phi;
    std::vector<double> zero_b;
    for (int j = 0; j < M; ++j) {
        const double s = static_cast<double>(j) / M;
        if (std::abs(b(s)) < 1e-12) zero_b.push_back(s);
    }
    if (!zero_b.empty()) throw InputError("solve_poincare", "b vanishes on the boundary");
    const auto data = BoundaryFunction::sample([b, phi](double s) { return Complex(phi(s).real() / b(s).real()); }, 64);
    auto out = solve_directional(spec.domain, g, spec.nu, data, spec.partition, opt);
    out.kind = "poincare";
    return out;
}

// ---------------------------------------------------------------------------
// A-harmonic directional problem

struct AHarmonicDiagnostics {
    QCMap h;
    PlanarDomain image = PlanarDomain::unit_disk();
    std::shared_ptr<const ConformalMap> image_map;
    double min_h_nu = 0;
    std::vector<double> vanishing;  // parameters where |h_nu| is too small
};

struct AHarmonicSolution {
    SolutionField field;
    AHarmonicDiagnostics diag;
};

namespace detail {

/// mu on D, extended by the value at the nearest boundary point within the
/// margin and clipped to k_star.
inline BeltramiCoefficient extend_coefficient(const PlanarDomain& D, const BeltramiCoefficient& mu, double margin,
                                              double k_star) {
    if (mu.is_zero()) return mu;
    auto curve = std::make_shared<JordanCurve>(D.boundary());
    const auto f = mu.fn;
    const bool disk = D.is_unit_disk();
    return BeltramiCoefficient::from_function(
        [curve, f, margin, k_star, disk](Complex z) -> Complex {
            Complex v;
            if (disk) {
                const double r = std::abs(z);
                if (r < 1) v = f(z);
                else if (r <= 1 + margin) v = f(z / r * (1 - 1e-12));
                else return 0.0;
            } else if (curve->contains(z)) {
                v = f(z);
            } else {
                const auto nb = curve->nearest(z);
                if (nb.distance > margin) return 0.0;
                v = f(nb.point);
            }
            const double a = std::abs(v);
            return a > k_star ? v * (k_star / a) : v;
        },
        std::min(mu.k, k_star), "extended-" + mu.kind);
}

}  // namespace detail

/// div A grad u = 0 with <nu, grad u> -> phi: u = U o h, h the principal
/// solution for the extended mu = mu(A), U the directional solution on
/// h(D) for direction h_nu/|h_nu| and data phi/|h_nu|.
inline AHarmonicSolution solve_a_harmonic_directional(const PlanarDomain& D, const EllipticMatrix& A,
                                                      const BoundaryFunction& nu, const BoundaryFunction& phi,
                                                      const ArcPartition& partition = ArcPartition::circle(),
                                                      const FrontendOptions& opt = {},
                                                      const ConformalMap* image_map = nullptr) {
    AHarmonicSolution out;
    auto& dg = out.diag;
    const auto mu = A.mu();
    const double margin = 0.25 * D.boundary().diameter_estimate();
    const auto ext = detail::extend_coefficient(D, mu, margin, 0.5 * (1 + mu.k));
    dg.h = mu.is_zero() ? QCMap::identity() : principal_solution(ext, opt.beltrami);
    auto H = std::make_shared<QCMap>(dg.h);
    const auto curve = std::make_shared<JordanCurve>(D.boundary());
    const double dh = mu.is_zero() ? 1e-6 : static_cast<double>(opt.stride) * dg.h.values.spacing();

    // h_nu at the boundary, centered differences at spacing dh
    const bool id = mu.is_zero();
    auto h_nu = [H, curve, nu, dh, id](double s) {
        const Complex z = curve->point(s), v = nu(s);
        if (id) return v;
        return ((*H)(z + dh * v) - (*H)(z - dh * v)) / (2 * dh);
    };
    const std::size_t K = 4096;
    dg.min_h_nu = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < K; ++j) {
        const double s = static_cast<double>(j) / K, a = std::abs(h_nu(s));
        dg.min_h_nu = std::min(dg.min_h_nu, a);
        if (a < 1e-8) dg.vanishing.push_back(s);
    }
    std::vector<double> breaks = partition.exceptional();
    breaks.insert(breaks.end(), dg.vanishing.begin(), dg.vanishing.end());
    ArcPartition part = breaks.empty() ? partition : ArcPartition::from_breaks(breaks);

    std::shared_ptr<const ConformalMap> gstar;
    if (mu.is_zero()) {
        dg.image = D;
        gstar = std::make_shared<ConformalMap>(image_map ? *image_map
                                                         : (D.is_unit_disk() ? identity_map() : theodorsen_map(D)));
    } else {
        auto image = JordanCurve::from_function([H, curve](double s) { return (*H)(curve->point(s)); }, 4096, "qc-image");
        dg.image = PlanarDomain(image, (*H)(D.basepoint()), "qc-image");
        if (image_map) {
            gstar = std::make_shared<ConformalMap>(*image_map);
        } else {
            // theodorsen_map raises the unsupported-domain error when h(D) is not starlike
            TheodorsenOptions to;
            to.N = opt.map_modes;
            gstar = std::make_shared<ConformalMap>(theodorsen_map(dg.image, to));
        }
    }
    dg.image_map = gstar;
    auto Nfield = BoundaryFunction::sample(
        [h_nu](double s) {
            const Complex d = h_nu(s);
            return std::abs(d) < 1e-8 ? Complex(1.0) : d / std::abs(d);
        },
        64);
    auto Phi = BoundaryFunction::sample(
        [h_nu, phi](double s) {
            const double a = std::abs(h_nu(s));
            return a < 1e-8 ? Complex(0.0) : Complex(phi(s).real() / a);
        },
        64);
    auto core = std::make_shared<detail::DirectionalCore>(detail::directional_core(*gstar, Nfield, Phi, part, opt));

    auto& f = out.field;
    f.kind = "a-harmonic-directional";
    f.F = [core, H](Complex z) {
        Complex w = core->g->forward((*H)(z));
        detail::clamp_disk(w);
        return core->Fw(w);
    };
    f.f = [core, H](Complex z) {
        Complex w = core->g->forward((*H)(z));
        detail::clamp_disk(w);
        return core->disk.f(w);
    };
    const auto gp = core->g;
    const auto s_of = [gp](double u) { return wrap_unit(gp->boundary_param(two_pi * u)); };
    const std::size_t M = 2 * static_cast<std::size_t>(opt.modes) + 1;
    std::vector<double> exc_s;
    for (double e : core->exc_u) exc_s.push_back(s_of(e));
    const auto mask = detail::node_mask(M, core->partition, exc_s, static_cast<double>(opt.band) / opt.modes);
    const auto u = [F = f.F](Complex z) { return F(z).real(); };
    const double ap = opt.aperture, tol = opt.residual_tol;
    f.tables.push_back(detail::build_table(
        "derivative", D, mask,
        [&](std::size_t, double s, Complex zeta, Complex inward) {
            return detail::directional_limit(u, nu(s), zeta, inward, ap, tol, opt.radii);
        },
        [&phi](double s) { return phi(s).real(); }, tol, opt.required));
    for (double e : core->partition.exceptional()) f.exceptional.push_back(e);
    for (double e : core->exc_u) f.exceptional.push_back(s_of(e));
    std::sort(f.exceptional.begin(), f.exceptional.end());
    const double d = mu.is_zero() ? 1.0 / 64 : dh;
    const auto pts = detail::interior_lattice(D, std::max(d, 1.0 / 32), 3 * d);
    f.operator_residual = detail::operator_residual(u, A, pts, d);
    f.operator_points = pts.size();
    f.pass = f.tables[0].pass;
    return out;
}

}  // namespace qcbvp
