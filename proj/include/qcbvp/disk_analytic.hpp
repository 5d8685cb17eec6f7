#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qcbvp/boundary_data.hpp"
#include "qcbvp/core.hpp"
#include "qcbvp/fft.hpp"

namespace qcbvp {

/// (1 - z conj(zeta))^exponent, principal branch (the base has positive real
/// part in the disk).
struct BoundaryFactor {
    Complex zeta;
    double exponent = 0;
};

/// coef (1 - z conj(zeta))^(-order) for Pole, coef log(1 - z conj(zeta)) for Log.
struct SingularTerm {
    enum class Kind { Pole, Log };
    Complex zeta;
    Kind kind = Kind::Pole;
    int order = 1;
    Complex coef;
};

/// Truncated Taylor series plus closed-form boundary singularities:
/// f(z) = (Σ a_k z^k + Σ terms) · Π factors.
class AnalyticDiskFunction {
public:
    std::vector<Complex> taylor;
    std::vector<SingularTerm> terms;
    std::vector<BoundaryFactor> factors;

    AnalyticDiskFunction() : taylor(1, 0.0) {}
    explicit AnalyticDiskFunction(std::vector<Complex> a) : taylor(std::move(a)) {
        if (taylor.empty()) taylor.push_back(0.0);
    }

    int order() const { return static_cast<int>(taylor.size()) - 1; }
    bool pure_series() const { return terms.empty() && factors.empty(); }

    static Complex horner(const std::vector<Complex>& a, Complex z) {
        Complex s = 0;
        for (std::size_t k = a.size(); k-- > 0;) s = s * z + a[k];
        return s;
    }

    /// Value at |z| <= 1; boundary points are allowed (finite series).
    Complex operator()(Complex z) const {
        if (std::abs(z) > 1 + 1e-12) throw DomainError("disk_function", "evaluation outside the closed disk");
        Complex s = horner(taylor, z);
        for (const auto& t : terms) {
            const Complex b = 1.0 - z * std::conj(t.zeta);
            s += t.kind == SingularTerm::Kind::Pole ? t.coef * std::pow(b, -t.order) : t.coef * std::log(b);
        }
        Complex p = 1.0;
        for (const auto& f : factors) p *= factor_value(f, z);
        return s * p;
    }

    Complex derivative(Complex z) const {
        if (std::abs(z) >= 1) throw DomainError("disk_function", "derivative needs an interior point");
        Complex s = horner(taylor, z), ds = 0;
        for (std::size_t k = taylor.size(); k-- > 1;) ds = ds * z + static_cast<double>(k) * taylor[k];
        for (const auto& t : terms) {
            const Complex a = std::conj(t.zeta), b = 1.0 - z * a;
            if (t.kind == SingularTerm::Kind::Pole) {
                s += t.coef * std::pow(b, -t.order);
                ds += t.coef * static_cast<double>(t.order) * a * std::pow(b, -t.order - 1);
            } else {
                s += t.coef * std::log(b);
                ds -= t.coef * a / b;
            }
        }
        Complex p = 1.0, logd = 0;
        for (const auto& f : factors) {
            p *= factor_value(f, z);
            const Complex a = std::conj(f.zeta);
            logd += -f.exponent * a / (1.0 - z * a);
        }
        return (ds + s * logd) * p;
    }

    static Complex factor_value(const BoundaryFactor& f, Complex z) {
        const Complex b = 1.0 - z * std::conj(f.zeta);
        const double r = std::round(f.exponent);
        if (std::abs(f.exponent - r) < 1e-12) return std::pow(b, static_cast<int>(r));
        return std::pow(b, f.exponent);
    }

    /// Coefficient-level derivative of a pure series.
    AnalyticDiskFunction series_derivative() const {
        if (!pure_series()) throw UnsupportedError("disk_function", "coefficient derivative needs a pure series");
        std::vector<Complex> d(std::max<std::size_t>(1, taylor.size() - 1), 0.0);
        for (std::size_t k = 1; k < taylor.size(); ++k) d[k - 1] = static_cast<double>(k) * taylor[k];
        return AnalyticDiskFunction(std::move(d));
    }
};

/// Truncated Cauchy product, orders 0..n.
inline std::vector<Complex> series_product(const std::vector<Complex>& a, const std::vector<Complex>& b, std::size_t n) {
    std::vector<Complex> c(n + 1, 0.0);
    for (std::size_t i = 0; i < a.size() && i <= n; ++i) {
        if (a[i] == 0.0) continue;
        const std::size_t lim = std::min(b.size(), n + 1 - i);
        for (std::size_t j = 0; j < lim; ++j) c[i + j] += a[i] * b[j];
    }
    return c;
}

/// exp(i g) to the order of g, from A' = i g' A.
inline std::vector<Complex> series_exp_i(const std::vector<Complex>& g) {
    const std::size_t n = g.size();
    std::vector<Complex> a(n, 0.0);
    a[0] = std::exp(I * g[0]);
    for (std::size_t m = 1; m < n; ++m) {
        Complex s = 0;
        for (std::size_t k = 1; k <= m; ++k) s += static_cast<double>(k) * g[k] * a[m - k];
        a[m] = I * s / static_cast<double>(m);
    }
    return a;
}

namespace detail {

/// T = (1 - a z) Q + r, top-down so that |a| = 1 keeps it stable.
inline std::vector<Complex> divide_linear(const std::vector<Complex>& T, Complex a, Complex* rem) {
    const std::size_t n = T.size() - 1;
    if (n == 0) {
        *rem = T[0];
        return {0.0};
    }
    std::vector<Complex> Q(n);
    Q[n - 1] = -T[n] / a;
    for (std::size_t k = n - 1; k >= 1; --k) Q[k - 1] = (Q[k] - T[k]) / a;
    *rem = T[0] - Q[0];
    return Q;
}

inline std::vector<Complex> poly_mul(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    return series_product(a, b, a.size() + b.size() - 2);
}

inline std::vector<Complex> linear_power(Complex a, int k) {
    std::vector<Complex> p{1.0};
    for (int i = 0; i < k; ++i) p = poly_mul(p, {1.0, -a});
    return p;
}

}  // namespace detail

/// Rewrites a series with integer-exponent factors as series + pole terms
/// (polynomial division, then partial fractions on the remainder).
inline AnalyticDiskFunction expand_poles(const AnalyticDiskFunction& f) {
    if (!f.terms.empty()) throw UnsupportedError("expand_poles", "function already carries singular terms");
    std::vector<Complex> T = f.taylor;
    struct Pole {
        Complex a;
        int k;
    };
    std::vector<Pole> poles;
    for (const auto& fac : f.factors) {
        const double r = std::round(fac.exponent);
        if (std::abs(fac.exponent - r) > 1e-12)
            throw UnsupportedError("expand_poles", "non-integer boundary exponent " + std::to_string(fac.exponent));
        const int e = static_cast<int>(r);
        if (e > 0) T = detail::poly_mul(T, detail::linear_power(std::conj(fac.zeta), e));
        else if (e < 0) poles.push_back({std::conj(fac.zeta), -e});
    }
    AnalyticDiskFunction out;
    if (poles.empty()) {
        out.taylor = T;
        return out;
    }
    std::vector<Complex> D{1.0};
    int K = 0;
    for (const auto& p : poles) {
        D = detail::poly_mul(D, detail::linear_power(p.a, p.k));
        K += p.k;
    }
    std::vector<Complex> Q = T;
    for (const auto& p : poles)
        for (int i = 0; i < p.k; ++i) {
            Complex r;
            Q = detail::divide_linear(Q, p.a, &r);
        }
    const auto DQ = detail::poly_mul(D, Q);
    Eigen::VectorXcd R(K);
    for (int i = 0; i < K; ++i) R[i] = (i < static_cast<int>(T.size()) ? T[i] : Complex(0.0)) - DQ[i];
    // columns: D / (1 - a_m z)^j
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(K, K);
    int col = 0;
    for (std::size_t m = 0; m < poles.size(); ++m)
        for (int j = 1; j <= poles[m].k; ++j, ++col) {
            std::vector<Complex> c{1.0};
            for (std::size_t q = 0; q < poles.size(); ++q)
                c = detail::poly_mul(c, detail::linear_power(poles[q].a, q == m ? poles[q].k - j : poles[q].k));
            for (int i = 0; i < K && i < static_cast<int>(c.size()); ++i) P(i, col) = c[i];
        }
    const Eigen::VectorXcd coef = P.partialPivLu().solve(R);
    out.taylor = Q;
    col = 0;
    for (const auto& p : poles)
        for (int j = 1; j <= p.k; ++j, ++col)
            out.terms.push_back({std::conj(p.a), SingularTerm::Kind::Pole, j, coef[col]});
    return out;
}

/// Antiderivative with F(0) = 0. Integer-exponent boundary factors are
/// expanded first; a simple pole integrates to a log term.
inline AnalyticDiskFunction antiderivative(const AnalyticDiskFunction& f) {
    AnalyticDiskFunction g = f.factors.empty() ? f : expand_poles(f);
    AnalyticDiskFunction F;
    F.taylor.assign(g.taylor.size() + 1, 0.0);
    for (std::size_t k = 0; k < g.taylor.size(); ++k) F.taylor[k + 1] = g.taylor[k] / static_cast<double>(k + 1);
    for (const auto& t : g.terms) {
        if (t.kind == SingularTerm::Kind::Log)
            throw UnsupportedError("antiderivative", "log terms are not integrated");
        const Complex a = std::conj(t.zeta);
        if (t.order == 1) {
            F.terms.push_back({t.zeta, SingularTerm::Kind::Log, 0, -t.coef / a});
        } else {
            const Complex c = t.coef / (static_cast<double>(t.order - 1) * a);
            F.terms.push_back({t.zeta, SingularTerm::Kind::Pole, t.order - 1, c});
            F.taylor[0] -= c;
        }
    }
    return F;
}

// ---------------------------------------------------------------------------
// Fourier data, Poisson and Schwartz integrals

struct FourierBoundaryData {
    int N = 0;
    std::vector<Complex> coeffs;  // c_k at index k + N
    bool real_flag = false;

    Complex c(int k) const { return std::abs(k) > N ? Complex(0.0) : coeffs[static_cast<std::size_t>(k + N)]; }
};

inline std::vector<double> equispaced_nodes(std::size_t m) {
    std::vector<double> s(m);
    for (std::size_t j = 0; j < m; ++j) s[j] = static_cast<double>(j) / m;
    return s;
}

inline bool is_equispaced(const BoundaryFunction& f) {
    const double m = static_cast<double>(f.size());
    for (std::size_t j = 0; j < f.size(); ++j)
        if (std::abs(f.param(j) - j / m) > 1e-12) return false;
    return true;
}

inline FourierBoundaryData fourier_analyze_values(const std::vector<Complex>& v, int N) {
    const std::size_t m = v.size();
    if (N < 0 || m < static_cast<std::size_t>(2 * N + 1))
        throw InputError("fourier_analyze", "need at least 2N+1 equispaced samples");
    double scale = 0, imag = 0;
    for (const auto& x : v) {
        scale = std::max(scale, std::abs(x));
        imag = std::max(imag, std::abs(x.imag()));
    }
    FourierBoundaryData d;
    d.N = N;
    d.real_flag = imag <= 1e-14 * std::max(1.0, scale);
    std::vector<Complex> x = v;
    if (d.real_flag)
        for (auto& y : x) y = y.real();
    const auto c = dft_forward(x);
    d.coeffs.assign(2 * N + 1, 0.0);
    for (int k = -N; k <= N; ++k) d.coeffs[k + N] = c[static_cast<std::size_t>((k % static_cast<int>(m) + m) % m)];
    if (d.real_flag) {
        d.coeffs[N] = d.coeffs[N].real();
        for (int k = 1; k <= N; ++k) d.coeffs[N - k] = std::conj(d.coeffs[N + k]);
    }
    return d;
}

/// Trapezoidal (FFT) coefficients c_k, |k| <= N. Uses the samples when they
/// are equispaced and numerous enough, otherwise samples the evaluator.
inline FourierBoundaryData fourier_analyze(const BoundaryFunction& f, int N) {
    if (N < 0) throw InputError("fourier_analyze", "N must be nonnegative");
    const std::size_t M = 2 * static_cast<std::size_t>(N) + 1;
    if (f.size() >= M && is_equispaced(f)) return fourier_analyze_values(f.values(), N);
    if (!f.has_evaluator()) throw InputError("fourier_analyze", "need at least 2N+1 equispaced samples");
    return fourier_analyze_values(f.resample(equispaced_nodes(M)).values(), N);
}

/// u(r e^{it}) = Σ c_k r^|k| e^{ikt}.
inline double poisson_extend(const FourierBoundaryData& d, Complex z) {
    if (!d.real_flag) throw InputError("poisson_extend", "boundary data must be real");
    if (std::abs(z) >= 1) throw DomainError("poisson_extend", "point outside the open disk");
    Complex s = 0;
    for (int k = d.N; k >= 1; --k) s = s * z + d.c(k);
    return d.c(0).real() + 2.0 * (s * z).real();
}

/// f = c_0 + 2 Σ_{k>=1} c_k z^k: Re f has boundary values alpha, Im f(0) = 0.
inline AnalyticDiskFunction schwartz_integral(const FourierBoundaryData& d) {
    if (!d.real_flag) throw InputError("schwartz_integral", "boundary data must be real");
    std::vector<Complex> a(d.N + 1);
    a[0] = d.c(0).real();
    for (int k = 1; k <= d.N; ++k) a[k] = 2.0 * d.c(k);
    return AnalyticDiskFunction(std::move(a));
}

// ---------------------------------------------------------------------------
// Jump splitting

struct Jump {
    double s = 0;
    double size = 0;  // alpha(s+) - alpha(s-)
};

namespace detail {

inline double cyc_dist(double a, double b) {
    const double d = std::abs(wrap_unit(a) - wrap_unit(b));
    return std::min(d, 1 - d);
}

/// One-sided linear extrapolation of node values toward s from the side
/// given by dir (+1 right, -1 left), skipping masked nodes.
inline double extrapolate_side(const std::vector<double>& v, const std::vector<bool>& skip, double s, int dir) {
    const long M = static_cast<long>(v.size());
    s = wrap_unit(s);
    long k = dir > 0 ? static_cast<long>(std::floor(s * M)) + 1 : static_cast<long>(std::ceil(s * M)) - 1;
    std::vector<std::pair<double, double>> pts;
    for (long step = 0; step < M && pts.size() < 2; ++step, k += dir) {
        const std::size_t i = static_cast<std::size_t>(((k % M) + M) % M);
        if (skip[i]) continue;
        const double si = static_cast<double>(i) / M;
        const double x = dir > 0 ? wrap_unit(si - s) : -wrap_unit(s - si);
        if (x == 0) continue;
        pts.emplace_back(x, v[i]);
    }
    if (pts.empty()) return 0;
    if (pts.size() == 1) return pts[0].second;
    const auto [x1, y1] = pts[0];
    const auto [x2, y2] = pts[1];
    return y1 - x1 * (y2 - y1) / (x2 - x1);
}

inline double sawtooth(double s, const Jump& j) {
    // (J / 2pi)(pi - (theta - theta_m) mod 2pi), zero at the jump itself
    const double t = wrap_unit(s - j.s);
    if (t == 0) return 0;
    return j.size / two_pi * (pi - two_pi * t);
}

}  // namespace detail

struct JumpSplit {
    std::vector<Jump> jumps;
    std::vector<double> rest;  // alpha minus the sawtooth parts, continuous
};

/// Jumps of node values across the given parameters, and the remainder
/// after subtracting matching sawtooth functions. Values at masked nodes
/// are replaced by interpolation of their neighbours.
/// Jumps at the `whole_turns` points are rounded to a multiple of 2 pi.
inline JumpSplit split_jumps(const std::vector<double>& v, const std::vector<bool>& masked,
                             const std::vector<double>& points, const std::vector<double>& whole_turns = {}) {
    const std::size_t M = v.size();
    JumpSplit out;
    for (double s : points) {
        const double left = detail::extrapolate_side(v, masked, s, -1);
        const double right = detail::extrapolate_side(v, masked, s, +1);
        double J = right - left;
        for (double w : whole_turns)
            if (detail::cyc_dist(w, s) < 1e-12) J = two_pi * std::round(J / two_pi);
        out.jumps.push_back({wrap_unit(s), J});
    }
    out.rest.assign(M, 0.0);
    for (std::size_t j = 0; j < M; ++j) {
        if (masked[j]) continue;
        double r = v[j];
        for (const auto& J : out.jumps) r -= detail::sawtooth(static_cast<double>(j) / M, J);
        out.rest[j] = r;
    }
    for (std::size_t j = 0; j < M; ++j) {
        if (!masked[j]) continue;
        std::size_t l = (j + M - 1) % M, r = (j + 1) % M;
        int guard = 0;
        while (masked[l] && ++guard < static_cast<int>(M)) l = (l + M - 1) % M;
        while (masked[r] && ++guard < 2 * static_cast<int>(M)) r = (r + 1) % M;
        const double dl = static_cast<double>((j + M - l) % M), dr = static_cast<double>((r + M - j) % M);
        out.rest[j] = (out.rest[l] * dr + out.rest[r] * dl) / (dl + dr);
    }
    return out;
}

/// Schwartz integral of node values with jumps at the given parameters: the
/// remainder goes through the FFT, each jump J at zeta_m contributes
/// (iJ/pi) log(1 - z conj(zeta_m)).
inline AnalyticDiskFunction schwartz_with_jumps(const std::vector<double>& v, const std::vector<bool>& masked,
                                                const std::vector<double>& points, std::vector<Jump>* jumps_out = nullptr,
                                                const std::vector<double>& whole_turns = {}) {
    const std::size_t M = v.size();
    if (M % 2 == 0) throw InputError("schwartz_integral", "node count must be odd (2N+1)");
    const int N = static_cast<int>((M - 1) / 2);
    auto split = split_jumps(v, masked, points, whole_turns);
    std::vector<Complex> rest(split.rest.begin(), split.rest.end());
    auto g = schwartz_integral(fourier_analyze_values(rest, N));
    for (const auto& j : split.jumps) {
        if (std::abs(j.size) < 1e-14) continue;
        g.terms.push_back({std::polar(1.0, two_pi * j.s), SingularTerm::Kind::Log, 0, I * j.size / pi});
    }
    if (jumps_out) *jumps_out = split.jumps;
    return g;
}

/// Schwartz integral of real boundary data with jumps at the exceptional
/// parameters, sampled on 2N+1 equispaced nodes.
inline AnalyticDiskFunction schwartz_integral(const BoundaryFunction& alpha, const std::vector<double>& exceptional,
                                              int N) {
    const std::size_t M = 2 * static_cast<std::size_t>(N) + 1;
    const auto nodes = equispaced_nodes(M);
    std::vector<double> v(M);
    std::vector<bool> masked(M, false);
    for (std::size_t j = 0; j < M; ++j) {
        for (double e : exceptional)
            if (detail::cyc_dist(nodes[j], e) < 1e-12) masked[j] = true;
        v[j] = masked[j] ? 0.0 : alpha(nodes[j]).real();
    }
    return schwartz_with_jumps(v, masked, exceptional);
}

// ---------------------------------------------------------------------------
// Angular limits

struct AngularLimit {
    Complex value;
    double spread = 0;  // largest disagreement between cone directions
    double error = 0;   // extrapolation error estimate
    bool converged = false;
};

/// Approach distances 2^-j, j = 4..14.
inline std::vector<double> default_radii() {
    std::vector<double> r;
    for (int j = 4; j <= 14; ++j) r.push_back(std::ldexp(1.0, -j));
    return r;
}

inline constexpr double default_aperture = pi / 3;

/// Limit of f at the boundary point zeta along the inward direction and the
/// cone directions at ±aperture/2, Neville-extrapolated on the four
/// smallest distances.
inline AngularLimit angular_limit(const std::function<Complex(Complex)>& f, Complex zeta, Complex inward,
                                  double aperture = default_aperture, std::vector<double> radii = default_radii(),
                                  double tol = 1e-6) {
    if (radii.size() < 2) throw InputError("angular_limit", "need at least two radii");
    std::sort(radii.begin(), radii.end(), std::greater<>());
    if (radii.size() > 4) radii.erase(radii.begin(), radii.end() - 4);
    inward /= std::abs(inward);
    std::vector<double> dirs{0.0};
    if (aperture > 0) dirs = {0.0, -aperture / 2, aperture / 2};
    AngularLimit out;
    std::vector<Complex> y(radii.size());
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        const Complex step = inward * std::polar(1.0, dirs[d]);
        for (std::size_t i = 0; i < radii.size(); ++i) y[i] = f(zeta + radii[i] * step);
        const auto [v, err] = neville_at_zero(radii, y);
        if (d == 0) {
            out.value = v;
            out.error = err;
        } else {
            out.spread = std::max(out.spread, std::abs(v - out.value));
            out.error = std::max(out.error, err);
        }
    }
    const double scale = std::max(1.0, std::abs(out.value));
    out.converged = std::isfinite(out.value.real()) && std::isfinite(out.value.imag()) &&
                    out.spread <= tol * scale && out.error <= tol * scale;
    return out;
}

inline AngularLimit angular_limit(const AnalyticDiskFunction& f, Complex zeta, double aperture = default_aperture,
                                  std::vector<double> radii = default_radii(), double tol = 1e-6) {
    return angular_limit([&f](Complex z) { return f(z); }, zeta, -zeta, aperture, std::move(radii), tol);
}

// ---------------------------------------------------------------------------
// Conjugate boundary function

struct ConjugateOptions {
    int N = 1024;
    int band = 4;        // nodes within band * (2 pi / N) of an exceptional point are not verified
    double tol = 1e-8;   // radial extrapolation agreement
    std::vector<double> whole_turns;  // points where alpha jumps by a multiple of 2 pi (lambda continuous)
};

struct ConjugateBoundary {
    BoundaryFunction beta;                  // on the 2N+1 nodes; 0 at masked nodes, series value elsewhere
    std::vector<double> exceptional;        // parameters
    std::vector<bool> exceptional_node;
    std::vector<bool> excluded;             // near an exceptional point, not verified
    std::vector<std::string> diagnostics;
    AnalyticDiskFunction g;                 // Schwartz integral of alpha
    std::vector<Jump> jumps;
    double capacity = 0;
};

namespace detail {

inline std::vector<bool> band_mask(std::size_t M, int N, int band, const std::vector<double>& pts) {
    std::vector<bool> out(M, false);
    const double w = static_cast<double>(band) / N;
    for (std::size_t j = 0; j < M; ++j)
        for (double e : pts)
            if (cyc_dist(static_cast<double>(j) / M, e) <= w + 1e-12) out[j] = true;
    return out;
}

}  // namespace detail

/// beta = boundary values of Im g, g the Schwartz integral of alpha, taken at
/// the nodes and certified by radial extrapolation. Exceptional: the
/// partition's exceptional points and nodes whose extrapolation fails.
inline ConjugateBoundary conjugate_boundary(const std::vector<double>& alpha_nodes, const std::vector<bool>& masked,
                                            const std::vector<double>& exceptional, const ConjugateOptions& opt) {
    const std::size_t M = alpha_nodes.size();
    const int N = opt.N;
    if (M != 2 * static_cast<std::size_t>(N) + 1) throw InputError("conjugate_boundary", "expected 2N+1 nodes");
    ConjugateBoundary out;
    out.g = schwartz_with_jumps(alpha_nodes, masked, exceptional, &out.jumps, opt.whole_turns);
    out.exceptional = exceptional;
    out.exceptional_node = masked;
    out.excluded = detail::band_mask(M, N, opt.band, exceptional);
    // Im g_reg at the nodes by one inverse FFT
    std::vector<Complex> buf(M, 0.0);
    for (int k = 0; k <= N; ++k) buf[k] = out.g.taylor[k];
    const auto greg = dft_inverse(buf);
    std::vector<Complex> beta(M, 0.0);
    for (std::size_t j = 0; j < M; ++j) {
        if (masked[j]) continue;
        const Complex zeta = std::polar(1.0, two_pi * j / M);
        double b = greg[j].imag();
        for (const auto& t : out.g.terms) b += (t.coef / I).real() * std::log(std::abs(1.0 - zeta * std::conj(t.zeta)));
        beta[j] = b;
    }
    const auto im_g = [&out](Complex z) { return Complex(out.g(z).imag()); };
    for (std::size_t j = 0; j < M; ++j) {
        if (masked[j] || out.excluded[j]) continue;
        const Complex zeta = std::polar(1.0, two_pi * j / M);
        const auto lim = angular_limit(im_g, zeta, -zeta, 0.0, default_radii(), opt.tol);
        const double scale = std::max(1.0, std::abs(beta[j].real()));
        if (!lim.converged || std::abs(lim.value.real() - beta[j].real()) > opt.tol * scale) {
            out.exceptional.push_back(static_cast<double>(j) / M);
            out.exceptional_node[j] = true;
            out.diagnostics.push_back("node " + std::to_string(j) + ": radial extrapolation did not converge");
        }
    }
    out.beta = BoundaryFunction(equispaced_nodes(M), std::move(beta));
    std::vector<Complex> pts;
    for (double e : out.exceptional) pts.push_back(std::polar(1.0, two_pi * e));
    is_negligible(pts, 1e-3, 1e-9, &out.capacity);
    return out;
}

inline ConjugateBoundary conjugate_boundary(const BoundaryFunction& alpha, const ArcPartition& partition,
                                            const ConjugateOptions& opt = {}) {
    const std::size_t M = 2 * static_cast<std::size_t>(opt.N) + 1;
    const auto nodes = equispaced_nodes(M);
    std::vector<double> v(M);
    std::vector<bool> masked(M, false);
    for (std::size_t j = 0; j < M; ++j) {
        masked[j] = partition.is_exceptional(nodes[j]);
        if (masked[j]) continue;
        const Complex a = alpha(nodes[j]);
        if (std::abs(a.imag()) > 1e-12 * std::max(1.0, std::abs(a)))
            throw InputError("conjugate_boundary", "alpha must be real");
        v[j] = a.real();
    }
    return conjugate_boundary(v, masked, partition.exceptional(), opt);
}

inline ConjugateBoundary conjugate_boundary(const ArgumentFunction& alpha, const ConjugateOptions& opt = {}) {
    return conjugate_boundary(alpha.alpha, alpha.partition, opt);
}

// ---------------------------------------------------------------------------
// Dirichlet and Hilbert problems in the disk

/// B with Re B -> phi at the nodes and Im B(0) = 0.
inline AnalyticDiskFunction solve_dirichlet_disk(const BoundaryFunction& phi, int N = 1024) {
    auto d = fourier_analyze(phi, N);
    if (!d.real_flag) throw InputError("solve_dirichlet_disk", "boundary data must be real");
    return schwartz_integral(d);
}

struct AngularLimitReport {
    std::vector<double> params;
    std::vector<double> limits;        // angular limits of Re(conj(lambda) f)
    std::vector<double> residuals;     // NaN where not verified
    std::vector<bool> converged;
    std::vector<std::size_t> exceptional;
    std::vector<std::size_t> excluded;
    double tolerance = 0;
    double max_residual = 0;
    std::size_t verified = 0;
    std::size_t failed = 0;
    bool pass = false;
};

struct HilbertOptions {
    int N = 1024;
    double aperture = default_aperture;
    double tol = 1e-6;
    int band = 4;
    std::vector<double> phi_exceptional;  // jumps of phi
    std::vector<double> radii = default_radii();  // distances from the boundary for the limit checks
};

struct HilbertSolution {
    AnalyticDiskFunction f, A, B, g;
    ArgumentFunction alpha;
    ConjugateBoundary beta;
    AngularLimitReport report;
    BoundaryFunction lambda_nodes, phi_nodes;
    std::vector<bool> skip;  // exceptional or excluded nodes
    double null_constant = 0;  // Im B adjustment used to cancel a boundary pole
};

/// Residual |Re(conj(lambda) f) - phi| of angular limits at the nodes not
/// marked in skip.
inline AngularLimitReport verify_hilbert(const AnalyticDiskFunction& f, const BoundaryFunction& lambda,
                                         const BoundaryFunction& phi, const std::vector<bool>& exceptional,
                                         const std::vector<bool>& excluded, double aperture, double tol,
                                         const std::vector<double>& radii = default_radii()) {
    const std::size_t M = lambda.size();
    AngularLimitReport r;
    r.tolerance = tol;
    r.params = lambda.params();
    r.limits.assign(M, std::nan(""));
    r.residuals.assign(M, std::nan(""));
    r.converged.assign(M, false);
    for (std::size_t j = 0; j < M; ++j) {
        if (exceptional[j]) {
            r.exceptional.push_back(j);
            continue;
        }
        if (excluded[j]) {
            r.excluded.push_back(j);
            continue;
        }
        const Complex zeta = std::polar(1.0, two_pi * lambda.param(j));
        const Complex cl = std::conj(lambda.value(j));
        const auto q = [&f, cl](Complex z) { return Complex((cl * f(z)).real()); };
        const auto lim = angular_limit(q, zeta, -zeta, aperture, radii, tol);
        const double res = std::abs(lim.value.real() - phi.value(j).real());
        r.limits[j] = lim.value.real();
        r.residuals[j] = res;
        r.converged[j] = lim.converged;
        r.max_residual = std::max(r.max_residual, std::isfinite(res) ? res : std::numeric_limits<double>::infinity());
        ++r.verified;
        if (!(res <= tol) || !lim.converged) ++r.failed;
    }
    r.pass = r.failed == 0;
    return r;
}

namespace detail {

inline void check_series(const std::vector<Complex>& a, const char* what) {
    double peak = 0, tail = 0;
    const std::size_t n = a.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double m = std::abs(a[k]);
        if (!std::isfinite(m) || m > 1e100)
            throw ResolutionError("solve_hilbert_disk", std::string(what) + " overflows; |g| is too large for the order, increase fourier_modes");
        peak = std::max(peak, m);
        if (k >= 3 * n / 4) tail = std::max(tail, m);
    }
    if (n > 16 && tail > 1e-2 * peak)
        throw ResolutionError("solve_hilbert_disk", std::string(what) + " is not resolved at this order; increase fourier_modes");
}

}  // namespace detail

/// f = A B with A = exp(i g), g the Schwartz integral of alpha, and
/// Re B = phi e^beta on the boundary; Re(conj(lambda) f) = phi at the nodes.
inline HilbertSolution solve_hilbert_disk(const CBVFunction& lambda, const BoundaryFunction& phi,
                                          const HilbertOptions& opt = {}) {
    const int N = opt.N;
    if (N < 1) throw InputError("solve_hilbert_disk", "fourier_modes must be positive");
    const std::size_t M = 2 * static_cast<std::size_t>(N) + 1;
    const auto nodes = equispaced_nodes(M);
    const auto& part = lambda.partition;

    // lambda on the nodes
    auto ln = lambda.base.resample(nodes);
    if (!lambda.base.has_evaluator()) {
        std::vector<Complex> v = ln.values();
        for (auto& x : v)
            if (std::abs(x) > 0) x /= std::abs(x);
        ln = ln.with_values(v);
    }
    HilbertSolution sol;
    sol.lambda_nodes = ln;
    sol.alpha = argument_function(certify_cbv(ln, part));

    std::vector<bool> masked(M, false);
    std::vector<double> a(M, 0.0);
    for (std::size_t j = 0; j < M; ++j) {
        masked[j] = part.is_exceptional(nodes[j]);
        a[j] = sol.alpha[j];
    }
    ConjugateOptions copt{N, opt.band, 1e-8, {}};
    // lambda continuous across a break: alpha only jumps by its winding there
    if (lambda.base.has_evaluator())
        for (double e : part.exceptional())
            if (std::abs(lambda.base(e + 1e-9) - lambda.base(e - 1e-9)) < 1e-6) copt.whole_turns.push_back(e);
    sol.beta = conjugate_boundary(a, masked, part.exceptional(), copt);
    sol.g = sol.beta.g;

    // A = exp(i g_reg) times the boundary factors of the log terms
    sol.A = AnalyticDiskFunction(series_exp_i(sol.g.taylor));
    detail::check_series(sol.A.taylor, "exp(i g)");
    // exp(i (iJ/pi) log(1 - z conj zeta)) = (1 - z conj zeta)^(-J/pi)
    for (const auto& t : sol.g.terms) sol.A.factors.push_back({t.zeta, -(t.coef / I).real()});

    // B from phi e^beta
    std::vector<Complex> d(M, 0.0);
    std::vector<bool> exc_node = sol.beta.exceptional_node;
    // nodes that only failed extrapolation keep their series value of beta in the data
    std::vector<bool> drop = masked;
    for (double e : opt.phi_exceptional)
        for (std::size_t j = 0; j < M; ++j)
            if (detail::cyc_dist(nodes[j], e) < 1e-12) drop[j] = true;
    for (double e : opt.phi_exceptional)
        for (std::size_t j = 0; j < M; ++j)
            if (detail::cyc_dist(nodes[j], e) < 1e-12) exc_node[j] = true;
    const auto pn = phi.resample(nodes);
    sol.phi_nodes = pn;
    for (std::size_t j = 0; j < M; ++j) {
        const Complex p = pn.value(j);
        if (std::abs(p.imag()) > 1e-12 * std::max(1.0, std::abs(p)))
            throw InputError("solve_hilbert_disk", "phi must be real");
        if (drop[j]) continue;
        if (!std::isfinite(p.real())) throw InputError("solve_hilbert_disk", "phi is not finite at a regular node");
        d[j] = p.real() * std::exp(sol.beta.beta.value(j).real());
    }
    sol.B = schwartz_integral(fourier_analyze_values(d, N));
    // a boundary pole of A is cancelled by the free imaginary constant of B
    const BoundaryFactor* worst = nullptr;
    for (const auto& fac : sol.A.factors)
        if (fac.exponent <= -1 + 1e-12 && (!worst || fac.exponent < worst->exponent)) worst = &fac;
    if (worst) {
        sol.null_constant = -sol.B(worst->zeta).imag();
        sol.B.taylor[0] += I * sol.null_constant;
    }

    sol.f = AnalyticDiskFunction(series_product(sol.A.taylor, sol.B.taylor, N));
    sol.f.factors = sol.A.factors;

    std::vector<double> all_exc = sol.beta.exceptional;
    all_exc.insert(all_exc.end(), opt.phi_exceptional.begin(), opt.phi_exceptional.end());
    const auto excluded = detail::band_mask(M, N, opt.band, all_exc);
    sol.skip.assign(M, false);
    for (std::size_t j = 0; j < M; ++j) sol.skip[j] = exc_node[j] || excluded[j];
    sol.report = verify_hilbert(sol.f, ln, pn, exc_node, excluded, opt.aperture, opt.tol, opt.radii);
    return sol;
}

/// f + A (i c): same boundary condition, since Re(conj(lambda) A i c) -> 0.
inline AnalyticDiskFunction null_family(const AnalyticDiskFunction& f, const AnalyticDiskFunction& A, double c) {
    if (!A.terms.empty() || !f.terms.empty())
        throw InputError("null_family", "expected factor form from solve_hilbert_disk");
    if (A.factors.size() != f.factors.size()) throw InputError("null_family", "f and A carry different factors");
    for (std::size_t m = 0; m < A.factors.size(); ++m)
        if (std::abs(A.factors[m].zeta - f.factors[m].zeta) > 1e-14 ||
            std::abs(A.factors[m].exponent - f.factors[m].exponent) > 1e-14)
            throw InputError("null_family", "f and A carry different factors");
    AnalyticDiskFunction out = f;
    out.taylor.resize(std::max(f.taylor.size(), A.taylor.size()), 0.0);
    for (std::size_t k = 0; k < A.taylor.size(); ++k) out.taylor[k] += I * c * A.taylor[k];
    return out;
}

}  // namespace qcbvp
