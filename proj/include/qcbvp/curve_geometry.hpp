#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "qcbvp/core.hpp"

namespace qcbvp {

/// Circular arc or straight segment. Parametric fixtures are unions of these,
/// which gives exact distance queries.
struct CurvePiece {
    enum class Kind { Arc, Segment } kind = Kind::Segment;
    Complex a, b;             // segment endpoints
    Complex center;           // arc
    double radius = 0, theta0 = 0, theta1 = 0;  // arc runs ccw from theta0 to theta1

    static CurvePiece segment(Complex p, Complex q) {
        CurvePiece c;
        c.kind = Kind::Segment;
        c.a = p;
        c.b = q;
        return c;
    }
    static CurvePiece arc(Complex c0, double r, double t0, double t1) {
        CurvePiece c;
        c.kind = Kind::Arc;
        c.center = c0;
        c.radius = r;
        c.theta0 = t0;
        c.theta1 = t1;
        return c;
    }

    double length() const {
        return kind == Kind::Segment ? std::abs(b - a) : radius * (theta1 - theta0);
    }
    Complex at(double u) const {  // u in [0,1]
        if (kind == Kind::Segment) return a + u * (b - a);
        return center + radius * std::polar(1.0, theta0 + u * (theta1 - theta0));
    }
    /// Nearest point parameter u in [0,1] and distance.
    std::pair<double, double> nearest(Complex z) const {
        if (kind == Kind::Segment) {
            const Complex d = b - a;
            const double l2 = std::norm(d);
            double u = l2 > 0 ? ((z - a) * std::conj(d)).real() / l2 : 0.0;
            u = std::clamp(u, 0.0, 1.0);
            return {u, std::abs(z - (a + u * d))};
        }
        const Complex w = z - center;
        if (std::abs(w) > 0) {
            double phi = std::arg(w);
            // bring phi into [theta0, theta0 + 2pi)
            phi = theta0 + wrap_two_pi(phi - theta0);
            if (phi <= theta1) {
                return {(phi - theta0) / (theta1 - theta0), std::abs(std::abs(w) - radius)};
            }
        }
        const double d0 = std::abs(z - at(0.0)), d1 = std::abs(z - at(1.0));
        return d0 <= d1 ? std::make_pair(0.0, d0) : std::make_pair(1.0, d1);
    }
};

/// Uniform bucket index over polyline segments.
class SegmentIndex {
public:
    SegmentIndex() = default;
    explicit SegmentIndex(const std::vector<Complex>& pts) : pts_(pts) {
        const std::size_t n = pts.size();
        double x0 = pts[0].real(), x1 = x0, y0 = pts[0].imag(), y1 = y0;
        for (const auto& p : pts) {
            x0 = std::min(x0, p.real());
            x1 = std::max(x1, p.real());
            y0 = std::min(y0, p.imag());
            y1 = std::max(y1, p.imag());
        }
        const double span = std::max({x1 - x0, y1 - y0, 1e-12});
        cells_ = std::clamp<int>(static_cast<int>(std::sqrt(static_cast<double>(n))), 1, 512);
        cell_ = span / cells_ * (1.0 + 1e-9);
        origin_ = Complex(x0, y0);
        nx_ = static_cast<int>((x1 - x0) / cell_) + 1;
        ny_ = static_cast<int>((y1 - y0) / cell_) + 1;
        buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
        for (std::size_t i = 0; i < n; ++i) {
            const Complex p = pts[i], q = pts[(i + 1) % n];
            const int ia = cx(std::min(p.real(), q.real())), ib = cx(std::max(p.real(), q.real()));
            const int ja = cy(std::min(p.imag(), q.imag())), jb = cy(std::max(p.imag(), q.imag()));
            for (int i2 = ia; i2 <= ib; ++i2)
                for (int j2 = ja; j2 <= jb; ++j2)
                    buckets_[static_cast<std::size_t>(j2) * nx_ + i2].push_back(static_cast<int>(i));
        }
    }

    /// Nearest segment: (segment index, fraction along segment, distance).
    struct Hit {
        std::size_t segment = 0;
        double u = 0, distance = std::numeric_limits<double>::infinity();
    };

    Hit nearest(Complex z) const {
        const auto& pts = pts_;
        const std::size_t n = pts.size();
        Hit best;
        const int ci = std::clamp(cx(z.real()), 0, nx_ - 1), cj = std::clamp(cy(z.imag()), 0, ny_ - 1);
        // distance from z to the grid box (if z is outside)
        const double ox = std::max({origin_.real() - z.real(), z.real() - (origin_.real() + nx_ * cell_), 0.0});
        const double oy = std::max({origin_.imag() - z.imag(), z.imag() - (origin_.imag() + ny_ * cell_), 0.0});
        const double outside = std::hypot(ox, oy);
        const int maxring = std::max(nx_, ny_);
        for (int ring = 0; ring <= maxring; ++ring) {
            if (ring > 0 && best.distance < outside + (ring - 1) * cell_) break;
            for (int j = cj - ring; j <= cj + ring; ++j) {
                if (j < 0 || j >= ny_) continue;
                const bool edge_row = (j == cj - ring || j == cj + ring);
                for (int i = ci - ring; i <= ci + ring; ++i) {
                    if (i < 0 || i >= nx_) continue;
                    if (!edge_row && i != ci - ring && i != ci + ring) continue;
                    for (int s : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
                        const auto seg = CurvePiece::segment(pts[s], pts[(s + 1) % n]);
                        auto [u, d] = seg.nearest(z);
                        if (d < best.distance || (d == best.distance && static_cast<std::size_t>(s) < best.segment)) {
                            best.distance = d;
                            best.u = u;
                            best.segment = static_cast<std::size_t>(s);
                        }
                    }
                }
            }
        }
        return best;
    }

    /// Candidate segments whose bucket overlaps the axis-aligned box.
    template <class F>
    void for_each_in_box(Complex lo, Complex hi, F&& f) const {
        const int ia = std::clamp(cx(lo.real()), 0, nx_ - 1), ib = std::clamp(cx(hi.real()), 0, nx_ - 1);
        const int ja = std::clamp(cy(lo.imag()), 0, ny_ - 1), jb = std::clamp(cy(hi.imag()), 0, ny_ - 1);
        for (int j = ja; j <= jb; ++j)
            for (int i = ia; i <= ib; ++i)
                for (int s : buckets_[static_cast<std::size_t>(j) * nx_ + i]) f(static_cast<std::size_t>(s));
    }

private:
    int cx(double x) const { return static_cast<int>(std::floor((x - origin_.real()) / cell_)); }
    int cy(double y) const { return static_cast<int>(std::floor((y - origin_.imag()) / cell_)); }

    std::vector<Complex> pts_;
    Complex origin_;
    double cell_ = 1;
    int cells_ = 1, nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

/// Closed counterclockwise curve. Always carries a polyline; parametric
/// fixtures add an analytic parameterization, exact pieces and an exact
/// containment predicate.
class JordanCurve {
public:
    JordanCurve() = default;

    static JordanCurve from_samples(std::vector<Complex> pts, std::string kind = "samples") {
        if (pts.size() >= 2 && std::abs(pts.front() - pts.back()) < 1e-14) pts.pop_back();
        if (pts.size() < 3) throw InputError("curve", "a curve needs at least 3 distinct samples");
        JordanCurve c;
        c.kind_ = std::move(kind);
        c.samples_ = std::move(pts);
        c.finish(true);
        return c;
    }

    static JordanCurve from_function(std::function<Complex(double)> param, std::size_t n, std::string kind,
                                     std::vector<CurvePiece> pieces = {},
                                     std::function<bool(Complex)> inside = {}) {
        if (n < 8) throw InputError("curve", "too few samples");
        JordanCurve c;
        c.kind_ = std::move(kind);
        c.param_ = std::move(param);
        c.pieces_ = std::move(pieces);
        c.inside_ = std::move(inside);
        c.samples_.resize(n);
        for (std::size_t j = 0; j < n; ++j) c.samples_[j] = c.param_(static_cast<double>(j) / n);
        c.finish(true);
        return c;
    }

    static JordanCurve circle(Complex center = 0.0, double r = 1.0, std::size_t n = 2048) {
        if (!(r > 0)) throw InputError("curve", "circle radius must be positive");
        return from_function([=](double s) { return center + r * std::polar(1.0, two_pi * s); }, n, "circle",
                             {CurvePiece::arc(center, r, 0.0, two_pi)},
                             [=](Complex z) { return std::abs(z - center) < r; });
    }

    /// Union of the unit disks centred at 0 and 1±i. s = 0 is the cusp point 1.
    static JordanCurve three_disks(std::size_t n = 4096) {
        const Complex cp(1, 1), cm(1, -1), c0(0, 0);
        std::vector<CurvePiece> pieces = {CurvePiece::arc(cp, 1, -pi / 2, pi),
                                          CurvePiece::arc(c0, 1, pi / 2, 3 * pi / 2),
                                          CurvePiece::arc(cm, 1, pi, 5 * pi / 2)};
        auto param = [pieces](double s) {
            s = wrap_unit(s);
            // arc lengths 3pi/2, pi, 3pi/2 out of 4pi
            if (s < 0.375) return pieces[0].at(s / 0.375);
            if (s < 0.625) return pieces[1].at((s - 0.375) / 0.25);
            return pieces[2].at((s - 0.625) / 0.375);
        };
        auto inside = [=](Complex z) {
            return std::abs(z - c0) < 1 || std::abs(z - cp) < 1 || std::abs(z - cm) < 1;
        };
        return from_function(param, n, "three_disks", pieces, inside);
    }

    static JordanCurve ellipse(double a, double b, Complex center = 0.0, std::size_t n = 2048) {
        if (!(a > 0 && b > 0)) throw InputError("curve", "ellipse semi-axes must be positive");
        return from_function(
            [=](double s) {
                const double t = two_pi * s;
                return center + Complex(a * std::cos(t), b * std::sin(t));
            },
            n, "ellipse", {},
            [=](Complex z) {
                const Complex w = z - center;
                return (w.real() / a) * (w.real() / a) + (w.imag() / b) * (w.imag() / b) < 1;
            });
    }

    /// Starlike curve r(theta) about `center`, parameter s = theta / 2pi.
    static JordanCurve polar(std::function<double(double)> r, Complex center = 0.0, std::size_t n = 2048) {
        auto curve = from_function([=](double s) { return center + r(two_pi * s) * std::polar(1.0, two_pi * s); },
                                   n, "polar", {}, [=](Complex z) {
                                       const Complex w = z - center;
                                       return std::abs(w) < r(std::arg(w));
                                   });
        curve.radial_ = r;
        curve.radial_center_ = center;
        return curve;
    }

    /// Axis-aligned square of half-width h, s = 0 at the corner (h, -h).
    static JordanCurve square(double h = 1.0, std::size_t n = 2048) {
        const Complex c[4] = {{h, -h}, {h, h}, {-h, h}, {-h, -h}};
        std::vector<CurvePiece> pieces;
        for (int k = 0; k < 4; ++k) pieces.push_back(CurvePiece::segment(c[k], c[(k + 1) % 4]));
        auto param = [pieces](double s) {
            s = wrap_unit(s) * 4;
            int k = std::min(3, static_cast<int>(s));
            return pieces[k].at(s - k);
        };
        return from_function(param, n, "square", pieces, [=](Complex z) {
            return std::abs(z.real()) < h && std::abs(z.imag()) < h;
        });
    }

    const std::vector<Complex>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    const std::string& kind() const { return kind_; }
    bool analytic() const { return static_cast<bool>(param_); }
    const std::vector<CurvePiece>& pieces() const { return pieces_; }
    /// Radial function when the curve was built as a starlike polar curve.
    const std::function<double(double)>& radial() const { return radial_; }
    Complex radial_center() const { return radial_center_; }

    Complex point(double s) const {
        s = wrap_unit(s);
        if (param_) return param_(s);
        const double x = s * samples_.size();
        const std::size_t i = static_cast<std::size_t>(x) % samples_.size();
        const double u = x - std::floor(x);
        return samples_[i] + u * (samples_[(i + 1) % samples_.size()] - samples_[i]);
    }

    double signed_area() const {
        double a = 0;
        const std::size_t n = samples_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Complex p = samples_[i], q = samples_[(i + 1) % n];
            a += p.real() * q.imag() - q.real() * p.imag();
        }
        return 0.5 * a;
    }

    double length() const {
        double l = 0;
        const std::size_t n = samples_.size();
        for (std::size_t i = 0; i < n; ++i) l += std::abs(samples_[(i + 1) % n] - samples_[i]);
        return l;
    }

    double diameter_estimate() const {
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (const auto& p : samples_) {
            x0 = std::min(x0, p.real());
            x1 = std::max(x1, p.real());
            y0 = std::min(y0, p.imag());
            y1 = std::max(y1, p.imag());
        }
        return std::hypot(x1 - x0, y1 - y0);
    }

    std::pair<Complex, Complex> bounding_box() const {
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (const auto& p : samples_) {
            x0 = std::min(x0, p.real());
            x1 = std::max(x1, p.real());
            y0 = std::min(y0, p.imag());
            y1 = std::max(y1, p.imag());
        }
        return {Complex(x0, y0), Complex(x1, y1)};
    }

    struct Nearest {
        Complex point;
        double s = 0, distance = 0;
    };

    /// Nearest boundary point, exact for piecewise fixtures.
    Nearest nearest(Complex z) const {
        if (!pieces_.empty()) {
            Nearest best{0.0, 0.0, std::numeric_limits<double>::infinity()};
            double total = 0;
            for (const auto& p : pieces_) total += p.length();
            double acc = 0;
            for (const auto& p : pieces_) {
                auto [u, d] = p.nearest(z);
                if (d < best.distance) best = {p.at(u), wrap_unit((acc + u * p.length()) / total), d};
                acc += p.length();
            }
            return best;
        }
        const auto hit = index_->nearest(z);
        const std::size_t n = samples_.size();
        const Complex p = samples_[hit.segment], q = samples_[(hit.segment + 1) % n];
        return {p + hit.u * (q - p), wrap_unit((hit.segment + hit.u) / n), hit.distance};
    }

    double distance(Complex z) const { return nearest(z).distance; }

    /// Crossing-number containment on the polyline, or the exact predicate.
    bool contains(Complex z) const {
        if (inside_) return inside_(z);
        return winding_number(z) != 0;
    }

    int winding_number(Complex z) const {
        // crossing count with a horizontal ray to +inf, using the y-slab index
        const std::size_t n = samples_.size();
        int w = 0;
        auto visit = [&](std::size_t i) {
            const Complex p = samples_[i], q = samples_[(i + 1) % n];
            if (p.imag() <= z.imag()) {
                if (q.imag() > z.imag() && cross(p, q, z) > 0) ++w;
            } else if (q.imag() <= z.imag() && cross(p, q, z) < 0) {
                --w;
            }
        };
        const double y = z.imag();
        if (y < slab_y0_ || y >= slab_y0_ + slab_h_ * slabs_.size()) return 0;
        const std::size_t k = std::min(slabs_.size() - 1, static_cast<std::size_t>((y - slab_y0_) / slab_h_));
        for (std::size_t i : slabs_[k]) visit(i);
        return w;
    }

    /// Unit tangent when one- and two-sided secants agree as lines within tol.
    std::optional<Complex> tangent_at(double s, double tol = 1e-3) const {
        s = wrap_unit(s);
        if (param_) {
            const double h = 1e-6;
            const Complex z = param_(s);
            const Complex fwd = param_(wrap_unit(s + h)) - z, bwd = z - param_(wrap_unit(s - h));
            if (std::abs(fwd) == 0 || std::abs(bwd) == 0) return std::nullopt;
            const double ang = std::abs(wrap_angle(2.0 * std::arg(fwd / bwd))) / 2.0;
            if (ang > tol) return std::nullopt;
            // smooth point: central difference; cusp: one-sided direction
            if (std::abs(std::arg(fwd / bwd)) < pi / 2) return (fwd + bwd) / std::abs(fwd + bwd);
            // cusp: extrapolate the one-sided secant angle linearly in the step
            const Complex fwd2 = param_(wrap_unit(s + 2 * h)) - z;
            const double a1 = std::arg(fwd), a2 = a1 + std::arg(fwd2 / fwd);
            return std::polar(1.0, 2 * a1 - a2);
        }
        const std::size_t n = samples_.size();
        const double x = s * n;
        const std::size_t i = static_cast<std::size_t>(std::llround(x)) % n;
        if (std::abs(x - std::round(x)) > 1e-9) {
            const std::size_t a = static_cast<std::size_t>(x) % n;
            const Complex d = samples_[(a + 1) % n] - samples_[a];
            return d / std::abs(d);
        }
        return sample_tangent(i, tol);
    }

    /// Per-sample tangent existence markers.
    std::vector<bool> tangent_flags(double tol = 1e-3) const {
        std::vector<bool> out(samples_.size());
        for (std::size_t i = 0; i < samples_.size(); ++i)
            out[i] = tangent_at(static_cast<double>(i) / samples_.size(), tol).has_value();
        return out;
    }

    /// Pairwise segment intersection test through the bucket index.
    bool is_simple() const {
        const std::size_t n = samples_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Complex a = samples_[i], b = samples_[(i + 1) % n];
            const Complex lo(std::min(a.real(), b.real()), std::min(a.imag(), b.imag()));
            const Complex hi(std::max(a.real(), b.real()), std::max(a.imag(), b.imag()));
            bool bad = false;
            index_->for_each_in_box(lo, hi, [&](std::size_t j) {
                if (bad || j <= i) return;
                if (j == (i + 1) % n || i == (j + 1) % n) return;
                if (segments_cross(a, b, samples_[j], samples_[(j + 1) % n])) bad = true;
            });
            if (bad) return false;
        }
        return true;
    }

private:
    static double cross(Complex p, Complex q, Complex z) {
        return (q.real() - p.real()) * (z.imag() - p.imag()) - (z.real() - p.real()) * (q.imag() - p.imag());
    }
    static bool segments_cross(Complex a, Complex b, Complex c, Complex d) {
        const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
        return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
    }

    std::optional<Complex> sample_tangent(std::size_t i, double tol) const {
        const std::size_t n = samples_.size();
        auto turn = [&](std::size_t k) {
            const Complex f = samples_[(k + 1) % n] - samples_[k];
            const Complex b = samples_[k] - samples_[(k + n - 1) % n];
            return std::abs(wrap_angle(2.0 * std::arg(f / b))) / 2.0;
        };
        const double t = turn(i);
        const double neighbours = std::max(turn((i + 1) % n), turn((i + n - 1) % n));
        if (t > std::max(tol, 3.0 * neighbours)) return std::nullopt;
        const Complex d = samples_[(i + 1) % n] - samples_[(i + n - 1) % n];
        return d / std::abs(d);
    }

    void finish(bool check_orientation) {
        if (check_orientation && signed_area() <= 0)
            throw InputError("curve", "boundary samples must be counterclockwise");
        index_ = std::make_shared<SegmentIndex>(samples_);
        // y-slab buckets for containment
        const auto [lo, hi] = bounding_box();
        const std::size_t nslab = std::clamp<std::size_t>(samples_.size() / 4, 1, 4096);
        slab_y0_ = lo.imag();
        slab_h_ = std::max(hi.imag() - lo.imag(), 1e-12) / nslab * (1 + 1e-12);
        slabs_.assign(nslab, {});
        const std::size_t n = samples_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double ya = std::min(samples_[i].imag(), samples_[(i + 1) % n].imag());
            const double yb = std::max(samples_[i].imag(), samples_[(i + 1) % n].imag());
            const std::size_t ka = std::min(nslab - 1, static_cast<std::size_t>((ya - slab_y0_) / slab_h_));
            const std::size_t kb = std::min(nslab - 1, static_cast<std::size_t>((yb - slab_y0_) / slab_h_));
            for (std::size_t k = ka; k <= kb; ++k) slabs_[k].push_back(i);
        }
    }

    std::string kind_ = "samples";
    std::vector<Complex> samples_;
    std::function<Complex(double)> param_;
    std::vector<CurvePiece> pieces_;
    std::function<bool(Complex)> inside_;
    std::function<double(double)> radial_;
    Complex radial_center_;
    std::shared_ptr<SegmentIndex> index_;
    double slab_y0_ = 0, slab_h_ = 1;
    std::vector<std::vector<std::size_t>> slabs_;
};

class PlanarDomain {
public:
    PlanarDomain() = default;
    PlanarDomain(JordanCurve boundary, Complex z0, std::string name = "domain")
        : boundary_(std::move(boundary)), z0_(z0), name_(std::move(name)) {
        if (!boundary_.contains(z0_) || boundary_.distance(z0_) <= 0)
            throw InputError("domain", "basepoint is not an interior point");
    }

    static PlanarDomain unit_disk(std::size_t n = 2048) {
        return PlanarDomain(JordanCurve::circle(0.0, 1.0, n), 0.0, "unit-disk");
    }
    static PlanarDomain three_disks(std::size_t n = 4096) {
        return PlanarDomain(JordanCurve::three_disks(n), 0.0, "three-disks");
    }

    const JordanCurve& boundary() const { return boundary_; }
    Complex basepoint() const { return z0_; }
    const std::string& name() const { return name_; }
    bool contains(Complex z) const { return boundary_.contains(z) && boundary_.distance(z) > 0; }

    /// True when the domain is the unit disk up to sampling (identity/Möbius maps apply).
    bool is_unit_disk() const {
        const auto& p = boundary_.pieces();
        return boundary_.kind() == "circle" && p.size() == 1 && std::abs(p[0].center) < 1e-14 &&
               std::abs(p[0].radius - 1.0) < 1e-14;
    }

private:
    JordanCurve boundary_;
    Complex z0_;
    std::string name_;
};

inline double distance_to_boundary(const PlanarDomain& domain, Complex z) {
    if (!domain.boundary().contains(z)) throw DomainError("distance_to_boundary", "point is not interior");
    const double d = domain.boundary().distance(z);
    if (d <= 0) throw DomainError("distance_to_boundary", "point lies on the boundary");
    return d;
}

/// Single-source quasihyperbolic distances on a uniform grid anchored at z0.
class QuasihyperbolicField {
public:
    QuasihyperbolicField(const PlanarDomain& domain, Complex z0, double h) : domain_(&domain), z0_(z0), h_(h) {
        if (!(h > 0)) throw InputError("quasihyperbolic", "resolution must be positive");
        const double d0 = distance_to_boundary(domain, z0);
        (void)d0;
        const auto [lo, hi] = domain.boundary().bounding_box();
        i0_ = static_cast<int>(std::floor((lo.real() - z0.real()) / h)) - 1;
        j0_ = static_cast<int>(std::floor((lo.imag() - z0.imag()) / h)) - 1;
        nx_ = static_cast<int>(std::ceil((hi.real() - z0.real()) / h)) - i0_ + 2;
        ny_ = static_cast<int>(std::ceil((hi.imag() - z0.imag()) / h)) - j0_ + 2;
        const std::size_t total = static_cast<std::size_t>(nx_) * ny_;
        dist_to_bdry_.assign(total, 0.0);
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i) {
                const Complex z = node(i, j);
                if (domain.boundary().contains(z)) dist_to_bdry_[idx(i, j)] = domain.boundary().distance(z);
            }
        run_dijkstra();
    }

    double resolution() const { return h_; }

    /// k_D(z, z0). The last leg from nearby graph nodes is integrated along a
    /// straight segment with grading toward z.
    double distance(Complex z) const {
        if (z == z0_) return 0.0;
        const double dz = distance_to_boundary(*domain_, z);
        const double reach = dz < 4 * h_ ? 8 * h_ : 2.0 * h_;
        const int ci = static_cast<int>(std::round((z.real() - z0_.real()) / h_)) - i0_;
        const int cj = static_cast<int>(std::round((z.imag() - z0_.imag()) / h_)) - j0_;
        const int r = static_cast<int>(std::ceil(reach / h_)) + 1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = cj - r; j <= cj + r; ++j)
            for (int i = ci - r; i <= ci + r; ++i) {
                if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
                const std::size_t k = idx(i, j);
                if (!std::isfinite(label_[k])) continue;
                const Complex q = node(i, j);
                const double len = std::abs(q - z);
                if (len > reach || len >= std::max(dist_to_bdry_[k], dz)) continue;
                best = std::min(best, label_[k] + leg(q, z));
            }
        if (!std::isfinite(best)) throw InfeasibleError("quasihyperbolic", "point not connected to the grid graph");
        return best;
    }

private:
    Complex node(int i, int j) const { return z0_ + h_ * Complex(i + i0_, j + j0_); }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

    double leg(Complex q, Complex z) const {
        // ∫ ds / d along [q, z], geometric grading toward z
        const double len = std::abs(z - q);
        if (len == 0) return 0;
        const double dz = domain_->boundary().distance(z);
        std::vector<double> cuts{0.0};
        double t = 1.0;
        while (t * len > 0.25 * dz && t > 1e-12) {
            cuts.push_back(1.0 - t);
            t *= 0.5;
        }
        cuts.push_back(1.0);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                     0.8611363115940526};
        static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                     0.3478548451374538};
        double sum = 0;
        for (std::size_t m = 0; m + 1 < cuts.size(); ++m) {
            const double a = cuts[m], b = cuts[m + 1];
            for (int g = 0; g < 4; ++g) {
                const double u = 0.5 * (a + b) + 0.5 * (b - a) * gx[g];
                const double d = domain_->boundary().distance(q + u * (z - q));
                sum += 0.5 * (b - a) * gw[g] * len / std::max(d, 1e-300);
            }
        }
        return sum;
    }

    void run_dijkstra() {
        const std::size_t total = dist_to_bdry_.size();
        label_.assign(total, std::numeric_limits<double>::infinity());
        const int si = -i0_, sj = -j0_;
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        label_[idx(si, sj)] = 0;
        heap.push({0.0, idx(si, sj)});
        static const int di[8] = {1, -1, 0, 0, 1, 1, -1, -1};
        static const int dj[8] = {0, 0, 1, -1, 1, -1, 1, -1};
        while (!heap.empty()) {
            auto [l, k] = heap.top();
            heap.pop();
            if (l > label_[k]) continue;
            const int i = static_cast<int>(k % nx_), j = static_cast<int>(k / nx_);
            const double d1 = dist_to_bdry_[k];
            for (int e = 0; e < 8; ++e) {
                const int i2 = i + di[e], j2 = j + dj[e];
                if (i2 < 0 || j2 < 0 || i2 >= nx_ || j2 >= ny_) continue;
                const std::size_t k2 = idx(i2, j2);
                const double d2 = dist_to_bdry_[k2];
                if (d2 <= 0) continue;
                const double len = e < 4 ? h_ : h_ * std::sqrt(2.0);
                if (len >= std::max(d1, d2)) continue;
                const double w = 0.5 * len * (1.0 / d1 + 1.0 / d2);
                if (l + w < label_[k2]) {
                    label_[k2] = l + w;
                    heap.push({label_[k2], k2});
                }
            }
        }
    }

    const PlanarDomain* domain_;
    Complex z0_;
    double h_;
    int i0_ = 0, j0_ = 0, nx_ = 0, ny_ = 0;
    std::vector<double> dist_to_bdry_, label_;
};

inline double quasihyperbolic_distance(const PlanarDomain& domain, Complex z, Complex z0, double resolution) {
    if (z == z0) {
        distance_to_boundary(domain, z);
        return 0.0;
    }
    distance_to_boundary(domain, z);
    return QuasihyperbolicField(domain, z0, resolution).distance(z);
}

struct QhbFit {
    double a = 0, b = 0;
    double max_residual = 0;   // largest gap below the bound on the fit probes
    double max_violation = 0;  // largest excess on the certification probes
    double tolerance = 0;
    std::size_t violations = 0;  // certification probes exceeding the bound by more than tolerance
    bool holds = false;
    std::vector<double> k, log_ratio, distance;
};

/// Fits the tightest bound k_D(z, z0) ≤ a·ln(d(z0)/d(z)) + b over the shallower
/// half of the probes and certifies it on the deeper half.
inline QhbFit check_qhb_condition(const PlanarDomain& domain, Complex z0, const std::vector<Complex>& probes,
                                  double resolution = 1.0 / 256, double tolerance = 0.1) {
    if (probes.size() < 3) throw InputError("qhb", "at least 3 probe points are required");
    const double d0 = distance_to_boundary(domain, z0);
    QuasihyperbolicField field(domain, z0, resolution);
    QhbFit fit;
    fit.tolerance = tolerance;
    std::vector<std::size_t> order(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const double d = distance_to_boundary(domain, probes[i]);
        fit.distance.push_back(d);
        fit.log_ratio.push_back(std::log(d0 / d));
        fit.k.push_back(field.distance(probes[i]));
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return fit.log_ratio[x] < fit.log_ratio[y]; });
    const std::size_t nfit = std::max<std::size_t>(2, (probes.size() + 1) / 2);
    // tightest line above the fit probes: the upper-hull edge over the mean abscissa
    std::vector<std::pair<double, double>> pts;
    double mean = 0;
    for (std::size_t m = 0; m < nfit; ++m) {
        pts.emplace_back(fit.log_ratio[order[m]], fit.k[order[m]]);
        mean += pts.back().first / nfit;
    }
    std::sort(pts.begin(), pts.end());
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2) {
            const auto& o = hull[hull.size() - 2];
            const auto& q = hull.back();
            const double cr = (q.first - o.first) * (p.second - o.second) - (q.second - o.second) * (p.first - o.first);
            if (cr >= 0) hull.pop_back();
            else break;
        }
        if (!hull.empty() && hull.back().first == p.first) hull.back().second = std::max(hull.back().second, p.second);
        else hull.push_back(p);
    }
    if (hull.size() < 2) throw InputError("qhb", "probe distances must span a range");
    std::size_t e = 0;
    while (e + 2 < hull.size() && hull[e + 1].first < mean) ++e;
    fit.a = (hull[e + 1].second - hull[e].second) / (hull[e + 1].first - hull[e].first);
    fit.b = hull[e].second - fit.a * hull[e].first;
    for (std::size_t m = 0; m < nfit; ++m) {
        const std::size_t i = order[m];
        const double r = fit.k[i] - (fit.a * fit.log_ratio[i] + fit.b);
        fit.max_residual = std::max(fit.max_residual, std::abs(r));
        if (r > 0) fit.b += r;  // rounding guard
    }
    for (std::size_t m = nfit; m < probes.size(); ++m) {
        const std::size_t i = order[m];
        const double excess = fit.k[i] - (fit.a * fit.log_ratio[i] + fit.b);
        fit.max_violation = std::max(fit.max_violation, excess);
        if (excess > tolerance) ++fit.violations;
    }
    fit.holds = std::isfinite(fit.a) && std::isfinite(fit.b) && fit.violations == 0;
    return fit;
}

struct AConditionProfile {
    std::vector<double> radii, ratio;
    double theta0 = 0;      // min ratio (domain side)
    double theta_star = 0;  // min complement ratio
    std::string degenerate_side;  // "", "domain" or "complement"
    bool monotone_to_degenerate = false;
    bool domain_side_holds = true, complement_side_holds = true;
};

/// mes(D ∩ B(ζ,ρ)) / mes B(ζ,ρ) by stratified jittered sampling in polar cells.
inline AConditionProfile check_A_condition(const PlanarDomain& domain, Complex zeta, const std::vector<double>& radii,
                                           std::size_t samples = 100000, std::uint64_t seed = 12345,
                                           double tolerance = 0.05) {
    if (radii.empty()) throw InputError("a_condition", "radius list is empty");
    for (double r : radii)
        if (!(r > 0)) throw InputError("a_condition", "radii must be positive");
    AConditionProfile out;
    out.radii = radii;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t side = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(samples))));
    for (double rho : radii) {
        std::size_t hit = 0, total = 0;
        for (std::size_t a = 0; a < side; ++a)
            for (std::size_t b = 0; b < side; ++b) {
                const double u = (a + unif(rng)) / side, v = (b + unif(rng)) / side;
                const Complex z = zeta + rho * std::sqrt(u) * std::polar(1.0, two_pi * v);
                if (domain.boundary().contains(z)) ++hit;
                ++total;
            }
        out.ratio.push_back(static_cast<double>(hit) / total);
    }
    out.theta0 = *std::min_element(out.ratio.begin(), out.ratio.end());
    out.theta_star = 1.0 - *std::max_element(out.ratio.begin(), out.ratio.end());
    const double last = out.ratio.back();
    if (last > 1.0 - tolerance) out.degenerate_side = "complement";
    if (last < tolerance) out.degenerate_side = "domain";
    if (!out.degenerate_side.empty()) {
        const double target = out.degenerate_side == "complement" ? 1.0 : 0.0;
        bool mono = true;
        for (std::size_t i = 1; i < out.ratio.size(); ++i)
            if (std::abs(out.ratio[i] - target) > std::abs(out.ratio[i - 1] - target) + 1e-12) mono = false;
        out.monotone_to_degenerate = mono;
        if (out.degenerate_side == "complement") out.complement_side_holds = false;
        else out.domain_side_holds = false;
    }
    return out;
}

struct NontangentialRay {
    double s = 0;          // boundary parameter of the vertex
    double aperture = 0;   // cone half-angle from the inward normal
    std::vector<double> radii;
};

/// Points at the given distances along the normal and the two directions at
/// ±aperture/2.
inline std::vector<Complex> nontangential_points(const NontangentialRay& ray, const PlanarDomain& domain) {
    if (!(ray.aperture >= 0 && ray.aperture < pi / 2))
        throw InputError("nontangential", "aperture must lie in [0, pi/2)");
    const auto tangent = domain.boundary().tangent_at(ray.s);
    if (!tangent) throw UnsupportedError("nontangential", "unsupported vertex: no tangent at the boundary point");
    const Complex zeta = domain.boundary().point(ray.s);
    const Complex normal = I * *tangent;
    std::vector<double> dirs{0.0};
    if (ray.aperture > 0) dirs = {-ray.aperture / 2, 0.0, ray.aperture / 2};
    std::vector<Complex> out;
    for (double psi : dirs)
        for (double r : ray.radii) {
            const Complex z = zeta + r * normal * std::polar(1.0, psi);
            if (!domain.contains(z)) throw DomainError("nontangential", "approach point left the domain");
            out.push_back(z);
        }
    return out;
}

}  // namespace qcbvp
