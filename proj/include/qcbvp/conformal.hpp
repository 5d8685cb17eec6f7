#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qcbvp/core.hpp"
#include "qcbvp/curve_geometry.hpp"
#include "qcbvp/disk_analytic.hpp"
#include "qcbvp/fft.hpp"

namespace qcbvp {

struct MapAccuracy {
    int iterations = 0;
    double residual = 0;
    double damping = 1;
    double ratio = 1;    // max r / min r of the boundary
    double epsilon = 0;  // max |r'/r|
};

/// Conformal map g of a Jordan domain onto the unit disk with g(z0) = 0.
/// forward = g, inverse = g^-1, boundary_angle = g_* on curve parameters.
class ConformalMap {
public:
    using Fn = std::function<Complex(Complex)>;
    using Angle = std::function<double(double)>;

    ConformalMap(std::string method, PlanarDomain domain, Fn forward, Fn inverse, Fn derivative, Fn inverse_derivative,
                 Angle boundary_angle, Angle boundary_param, MapAccuracy acc = {})
        : method_(std::move(method)), domain_(std::move(domain)), fwd_(std::move(forward)), inv_(std::move(inverse)),
          der_(std::move(derivative)), ider_(std::move(inverse_derivative)), bang_(std::move(boundary_angle)),
          bpar_(std::move(boundary_param)), acc_(acc) {}

    const std::string& method() const { return method_; }
    const PlanarDomain& domain() const { return domain_; }
    const MapAccuracy& accuracy() const { return acc_; }

    Complex forward(Complex z) const { return fwd_(z); }
    Complex inverse(Complex w) const {
        if (std::abs(w) > 1 + 1e-12) throw DomainError("conformal", "inverse needs |w| <= 1");
        return inv_(w);
    }
    Complex derivative(Complex z) const {
        const Complex d = der_(z);
        if (!(std::abs(d) >= 1e-12)) throw DomainError("conformal", "degenerate derivative");
        return d;
    }
    /// (g^-1)'(w) = 1 / g'(g^-1(w)).
    Complex inverse_derivative(Complex w) const {
        if (std::abs(w) >= 1) throw DomainError("conformal", "inverse derivative needs |w| < 1");
        return ider_(w);
    }
    /// Disk angle in [0, 2pi) of the image of the boundary point with parameter s.
    double boundary_angle(double s) const { return wrap_two_pi(bang_(wrap_unit(s))); }
    /// Curve parameter in [0, 1) of the preimage of e^{it}.
    double boundary_param(double t) const { return wrap_unit(bpar_(wrap_two_pi(t))); }

    /// Optional series data for export.
    std::vector<Complex> series;
    std::vector<double> table_t, table_theta;

private:
    std::string method_;
    PlanarDomain domain_;
    Fn fwd_, inv_, der_, ider_;
    Angle bang_, bpar_;
    MapAccuracy acc_;
};

inline ConformalMap identity_map() {
    auto d = PlanarDomain::unit_disk();
    return ConformalMap(
        "identity", d, [](Complex z) { return z; }, [](Complex w) { return w; }, [](Complex) { return Complex(1.0); },
        [](Complex) { return Complex(1.0); }, [](double s) { return two_pi * s; }, [](double t) { return t / two_pi; });
}

/// g(z) = (z - a)/(1 - conj(a) z).
inline ConformalMap moebius_map(Complex a) {
    if (!(std::abs(a) < 1)) throw InputError("conformal", "moebius parameter must lie in the disk");
    auto d = PlanarDomain(JordanCurve::circle(), a, "unit-disk");
    const Complex ab = std::conj(a);
    auto g = [a, ab](Complex z) { return (z - a) / (1.0 - ab * z); };
    auto gi = [a, ab](Complex w) { return (w + a) / (1.0 + ab * w); };
    auto dg = [a, ab](Complex z) { return (1.0 - std::norm(a)) / ((1.0 - ab * z) * (1.0 - ab * z)); };
    auto dgi = [a, ab](Complex w) { return (1.0 - std::norm(a)) / ((1.0 + ab * w) * (1.0 + ab * w)); };
    return ConformalMap(
        "moebius", d, g, gi, dg, dgi, [g](double s) { return std::arg(g(std::polar(1.0, two_pi * s))); },
        [gi](double t) { return std::arg(gi(std::polar(1.0, t))) / two_pi; });
}

namespace detail {

/// Polar description of a starlike curve about c: theta -> (s, r).
class RaySolver {
public:
    RaySolver(const JordanCurve& curve, Complex c, std::size_t n = 4096) : curve_(curve), c_(c) {
        if (curve.radial() && std::abs(curve.radial_center() - c) < 1e-14) {
            polar_ = true;
            return;
        }
        s_.resize(n + 1);
        th_.resize(n + 1);
        double prev = 0;
        for (std::size_t j = 0; j <= n; ++j) {
            s_[j] = static_cast<double>(j) / n;
            const Complex w = curve.point(s_[j]) - c;
            if (std::abs(w) == 0) throw UnsupportedError("conformal", "basepoint lies on the boundary");
            double a = std::arg(w);
            if (j == 0) {
                a0_ = a;
                th_[0] = 0;
            } else {
                double d = wrap_angle(a - prev);
                th_[j] = th_[j - 1] + d;
                if (!(d > 0)) throw UnsupportedError("conformal", "domain is not starlike about the basepoint");
            }
            prev = a;
        }
        if (std::abs(th_[n] - two_pi) > 1e-6) throw UnsupportedError("conformal", "domain is not starlike about the basepoint");
    }

    /// Curve parameter of the ray at angle theta.
    double param(double theta) const {
        if (polar_) return wrap_unit(theta / two_pi);
        double x = wrap_two_pi(theta - a0_);
        auto it = std::upper_bound(th_.begin(), th_.end(), x);
        std::size_t j = std::min<std::size_t>(std::max<std::ptrdiff_t>(1, it - th_.begin()), th_.size() - 1);
        double lo = s_[j - 1], hi = s_[j];
        double flo = th_[j - 1] - x, fhi = th_[j] - x;
        // regula falsi with bisection safeguard on the exact curve
        for (int k = 0; k < 60 && hi - lo > 1e-15; ++k) {
            double m = flo == fhi ? 0.5 * (lo + hi) : lo - flo * (hi - lo) / (fhi - flo);
            if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
            const double fm = wrap_angle(std::arg(curve_.point(m) - c_) - a0_ - x);
            if (std::abs(fm) < 1e-15) return m;
            if (fm > 0) {
                hi = m;
                fhi = fm;
            } else {
                lo = m;
                flo = fm;
            }
            if (k % 3 == 2) {  // keep the bracket shrinking
                const double mid = 0.5 * (lo + hi);
                const double fmid = wrap_angle(std::arg(curve_.point(mid) - c_) - a0_ - x);
                if (fmid > 0) {
                    hi = mid;
                    fhi = fmid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
        }
        return 0.5 * (lo + hi);
    }

    double radius(double theta) const {
        if (polar_) return curve_.radial()(wrap_angle(theta));
        return std::abs(curve_.point(param(theta)) - c_);
    }

    double angle_of(double s) const { return std::arg(curve_.point(s) - c_); }

private:
    const JordanCurve& curve_;
    Complex c_;
    bool polar_ = false;
    double a0_ = 0;
    std::vector<double> s_, th_;
};

/// Periodic trigonometric interpolant through M = 2N+1 node values.
struct TrigSeries {
    int N = 0;
    std::vector<Complex> c;  // c_k at k + N

    static TrigSeries fit(const std::vector<double>& v) {
        std::vector<Complex> x(v.begin(), v.end());
        const auto d = fourier_analyze_values(x, static_cast<int>((v.size() - 1) / 2));
        return {d.N, d.coeffs};
    }
    double operator()(double t) const {
        Complex s = c[N];
        const Complex e = std::polar(1.0, t);
        Complex p = 1.0;
        for (int k = 1; k <= N; ++k) {
            p *= e;
            s += 2.0 * (c[N + k] * p).real();
        }
        return s.real();
    }
    double derivative(double t) const {
        const Complex e = std::polar(1.0, t);
        Complex p = 1.0;
        double s = 0;
        for (int k = 1; k <= N; ++k) {
            p *= e;
            s += 2.0 * (I * static_cast<double>(k) * c[N + k] * p).real();
        }
        return s;
    }
};

}  // namespace detail

struct TheodorsenOptions {
    int N = 256;
    double tol = 1e-8;
    int max_iter = 5000;
};

/// Theodorsen's method for a domain starlike about its basepoint:
/// theta(t) = t + K[log r(theta(t))], F(w) = z0 + w exp(S[log r o theta](w)),
/// g = F^-1 by Newton's method.
inline ConformalMap theodorsen_map(const PlanarDomain& domain, const TheodorsenOptions& opt = {}) {
    const Complex c = domain.basepoint();
    auto rays = std::make_shared<detail::RaySolver>(domain.boundary(), c);
    const int N = opt.N;
    const std::size_t M = 2 * static_cast<std::size_t>(N) + 1;
    std::vector<double> t(M), theta(M), L(M);
    for (std::size_t j = 0; j < M; ++j) {
        t[j] = two_pi * j / M;
        L[j] = std::log(rays->radius(t[j]));
    }
    MapAccuracy acc;
    acc.ratio = std::exp(*std::max_element(L.begin(), L.end()) - *std::min_element(L.begin(), L.end()));
    for (std::size_t j = 0; j < M; ++j) acc.epsilon = std::max(acc.epsilon, std::abs(L[(j + 1) % M] - L[j]) * M / two_pi);
    double omega = acc.ratio >= 2 ? 0.5 : 1.0;
    // linearised step has spectrum near i*[-eps, eps]
    if (acc.epsilon > 1) omega = std::min(omega, 1 / (1 + acc.epsilon * acc.epsilon));
    theta = t;
    double best = 1e300;
    std::vector<Complex> buf(M);
    for (int it = 1;; ++it) {
        for (std::size_t j = 0; j < M; ++j) L[j] = std::log(rays->radius(theta[j]));
        std::vector<Complex> x(L.begin(), L.end());
        auto ck = dft_forward(x);
        for (std::size_t k = 0; k < M; ++k) {
            const long kk = k <= static_cast<std::size_t>(N) ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(M);
            buf[k] = kk == 0 ? 0.0 : -I * (kk > 0 ? 1.0 : -1.0) * ck[k];
        }
        const auto conj = dft_inverse(buf);
        double res = 0;
        for (std::size_t j = 0; j < M; ++j) {
            const double nt = t[j] + conj[j].real();
            res = std::max(res, std::abs(nt - theta[j]));
            theta[j] += omega * (nt - theta[j]);
        }
        acc.iterations = it;
        acc.residual = res;
        if (!std::isfinite(res)) throw ConvergenceError("theodorsen", "iteration diverged");
        if (res <= opt.tol) break;
        if (res > 2 * best) {
            omega *= 0.5;
            best = res;
            if (omega < 1.0 / 1024) throw ConvergenceError("theodorsen", "iteration diverges: boundary ratio condition violated");
        }
        best = std::min(best, res);
        if (it >= opt.max_iter) throw ConvergenceError("theodorsen", "no convergence within max_iter");
    }
    acc.damping = omega;
    for (std::size_t j = 1; j < M; ++j)
        if (!(theta[j] > theta[j - 1])) throw ConvergenceError("theodorsen", "boundary correspondence is not monotone");
    for (std::size_t j = 0; j < M; ++j) L[j] = std::log(rays->radius(theta[j]));
    auto h = std::make_shared<AnalyticDiskFunction>(schwartz_integral(fourier_analyze_values({L.begin(), L.end()}, N)));
    std::vector<double> dev(M);
    for (std::size_t j = 0; j < M; ++j) dev[j] = theta[j] - t[j];
    auto corr = std::make_shared<detail::TrigSeries>(detail::TrigSeries::fit(dev));

    // series evaluated directly so that F continues slightly past the circle
    auto hc = std::make_shared<std::vector<Complex>>(h->taylor);
    auto dhc = std::make_shared<std::vector<Complex>>(h->series_derivative().taylor);
    auto F = [hc, c](Complex w) { return c + w * std::exp(AnalyticDiskFunction::horner(*hc, w)); };
    auto dF = [hc, dhc](Complex w) {
        return std::exp(AnalyticDiskFunction::horner(*hc, w)) * (1.0 + w * AnalyticDiskFunction::horner(*dhc, w));
    };
    // seeds for the inverse
    auto seeds = std::make_shared<std::vector<std::pair<Complex, Complex>>>();
    for (double r : {0.0, 0.2, 0.4, 0.6, 0.75, 0.85, 0.92, 0.96, 0.98, 0.99, 0.995})
        for (int k = 0; k < (r == 0 ? 1 : 128); ++k) {
            const Complex w = std::polar(r, two_pi * k / 128);
            seeds->emplace_back(F(w), w);
        }
    // points just outside D map to |w| slightly above 1
    const double overshoot = 1.05;
    auto g = [F, dF, seeds, overshoot](Complex z) {
        Complex w = 0;
        double best = 1e300;
        for (const auto& [fz, fw] : *seeds)
            if (std::abs(fz - z) < best) {
                best = std::abs(fz - z);
                w = fw;
            }
        for (int k = 0; k < 100; ++k) {
            const Complex step = (F(w) - z) / dF(w);
            Complex nw = w - step;
            if (std::abs(nw) > overshoot) nw = 0.5 * (w + overshoot * nw / std::abs(nw));
            const double d = std::abs(nw - w);
            w = nw;
            if (d < 1e-12) return w;
        }
        throw ConvergenceError("theodorsen", "Newton inversion did not converge");
    };
    auto dg = [g, dF](Complex z) { return 1.0 / dF(g(z)); };
    // g_*: curve angle -> disk angle by inverting theta(t) = t + corr(t)
    auto tv = std::make_shared<std::vector<double>>(t);
    auto thv = std::make_shared<std::vector<double>>(theta);
    tv->push_back(two_pi);
    thv->push_back(theta[0] + two_pi);
    auto angle_to_t = [corr, tv, thv](double th) {
        th = wrap_two_pi(th - (*thv)[0]) + (*thv)[0];
        auto it = std::upper_bound(thv->begin(), thv->end(), th);
        const std::size_t j = std::clamp<std::size_t>(it - thv->begin(), 1, thv->size() - 1);
        double lo = (*tv)[j - 1], hi = (*tv)[j];
        double x = lo + (th - (*thv)[j - 1]) / ((*thv)[j] - (*thv)[j - 1]) * (hi - lo);
        // safeguarded Newton on the increasing function t + corr(t)
        for (int k = 0; k < 100 && hi - lo > 1e-15; ++k) {
            const double f = x + (*corr)(x) - th;
            if (f == 0) break;
            (f > 0 ? hi : lo) = x;
            double nx = x - f / (1 + corr->derivative(x));
            if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
            if (std::abs(nx - x) < 1e-15) break;
            x = nx;
        }
        return x;
    };
    auto bang = [rays, angle_to_t, c, curve = domain.boundary()](double s) {
        return angle_to_t(std::arg(curve.point(s) - c));
    };
    auto bpar = [rays, corr](double tt) { return rays->param(tt + (*corr)(tt)); };
    ConformalMap m("theodorsen", domain, g, F, dg, dF, bang, bpar, acc);
    m.series = h->taylor;
    m.table_t = t;
    m.table_theta = theta;
    return m;
}

/// riemann_map with method "identity", "moebius" (parameter a) or "theodorsen".
inline ConformalMap riemann_map(const PlanarDomain& domain, const std::string& method, Complex a = 0.0,
                                const TheodorsenOptions& opt = {}) {
    if (method == "identity") {
        if (!domain.is_unit_disk() || std::abs(domain.basepoint()) > 0)
            throw UnsupportedError("conformal", "identity map needs the unit disk with basepoint 0");
        return identity_map();
    }
    if (method == "moebius") {
        if (!domain.is_unit_disk()) throw UnsupportedError("conformal", "moebius map needs the unit disk");
        return moebius_map(a);
    }
    if (method == "theodorsen") return theodorsen_map(domain, opt);
    throw InputError("conformal", "unknown map method '" + method + "'");
}

struct HolderEstimate {
    double forward = 0;  // exponent of g_*
    double inverse = 0;  // exponent of g_*^-1
    std::vector<double> scales, forward_modulus, inverse_modulus;
};

namespace detail {

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

/// Log-log regression of the modulus of continuity of g_* and its inverse
/// over dyadic parameter steps 2^-j, j = j0..j1.
inline HolderEstimate holder_exponent_estimate(const ConformalMap& map, std::size_t samples = 8192, int j0 = 4,
                                               int j1 = 12) {
    const auto& curve = map.domain().boundary();
    HolderEstimate out;
    std::vector<double> s(samples), ang(samples);
    std::vector<Complex> z(samples), w(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        s[i] = static_cast<double>(i) / samples;
        z[i] = curve.point(s[i]);
        ang[i] = map.boundary_angle(s[i]);
        w[i] = std::polar(1.0, ang[i]);
    }
    std::vector<double> lx_f, ly_f, lx_i, ly_i;
    for (int j = j0; j <= j1; ++j) {
        const std::size_t step = std::max<std::size_t>(1, samples >> j);
        double dz = 0, dw = 0;
        for (std::size_t i = 0; i < samples; ++i) {
            dz = std::max(dz, std::abs(z[(i + step) % samples] - z[i]));
            dw = std::max(dw, std::abs(w[(i + step) % samples] - w[i]));
        }
        out.scales.push_back(dz);
        out.forward_modulus.push_back(dw);
        lx_f.push_back(std::log(dz));
        ly_f.push_back(std::log(dw));
    }
    // inverse: equal steps in the disk angle
    std::vector<Complex> zi(samples);
    for (std::size_t i = 0; i < samples; ++i) zi[i] = curve.point(map.boundary_param(two_pi * i / samples));
    for (int j = j0; j <= j1; ++j) {
        const std::size_t step = std::max<std::size_t>(1, samples >> j);
        double dw = 0, dz = 0;
        for (std::size_t i = 0; i < samples; ++i) {
            dw = std::max(dw, std::abs(std::polar(1.0, two_pi * ((i + step) % samples) / samples) -
                                       std::polar(1.0, two_pi * i / samples)));
            dz = std::max(dz, std::abs(zi[(i + step) % samples] - zi[i]));
        }
        out.inverse_modulus.push_back(dz);
        lx_i.push_back(std::log(dw));
        ly_i.push_back(std::log(dz));
    }
    out.forward = std::clamp(detail::slope(lx_f, ly_f), 1e-6, 1.0);
    out.inverse = std::clamp(detail::slope(lx_i, ly_i), 1e-6, 1.0);
    return out;
}

/// Starlike domain whose radial function is the Gaussian smoothing (width sigma
/// in angle) of the radial function of `domain` about its basepoint.
inline PlanarDomain starlike_smoothing(const PlanarDomain& domain, double sigma, std::size_t n = 4096) {
    if (!(sigma > 0)) throw InputError("conformal", "smoothing width must be positive");
    detail::RaySolver rays(domain.boundary(), domain.basepoint());
    std::vector<Complex> r(n);
    for (std::size_t j = 0; j < n; ++j) r[j] = rays.radius(two_pi * j / n);
    auto c = dft_forward(r);
    const int K = std::min<int>(static_cast<int>(n / 2) - 1, static_cast<int>(std::ceil(9.0 / sigma)));
    auto coef = std::make_shared<std::vector<double>>(2 * K + 1);
    for (int k = 0; k <= K; ++k) {
        const double damp = std::exp(-0.5 * k * k * sigma * sigma);
        (*coef)[2 * k] = (k == 0 ? c[0].real() : 2 * c[k].real()) * damp;
        if (k > 0) (*coef)[2 * k - 1] = -2 * c[k].imag() * damp;
    }
    auto radial = [coef, K](double th) {
        double s = (*coef)[0];
        for (int k = 1; k <= K; ++k) s += (*coef)[2 * k] * std::cos(k * th) + (*coef)[2 * k - 1] * std::sin(k * th);
        return s;
    };
    return PlanarDomain(JordanCurve::polar(radial, domain.basepoint(), n), domain.basepoint(), domain.name() + "-smoothed");
}

}  // namespace qcbvp
