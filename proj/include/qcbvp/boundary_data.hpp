#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qcbvp/capacity.hpp"
#include "qcbvp/core.hpp"
#include "qcbvp/curve_geometry.hpp"

namespace qcbvp {

/// Complex samples over boundary parameters s in [0, 1). An optional
/// evaluator gives exact values between samples; without one, values are
/// interpolated linearly and periodically.
class BoundaryFunction {
public:
    using Evaluator = std::function<Complex(double)>;

    BoundaryFunction() = default;
    BoundaryFunction(std::vector<double> params, std::vector<Complex> values,
                     std::shared_ptr<const JordanCurve> curve = nullptr, Evaluator eval = {})
        : s_(std::move(params)), v_(std::move(values)), curve_(std::move(curve)), eval_(std::move(eval)) {
        if (s_.size() != v_.size()) throw InputError("boundary_data", "parameters and values differ in length");
        if (s_.empty()) throw InputError("boundary_data", "boundary function has no samples");
        for (std::size_t i = 0; i < s_.size(); ++i) {
            if (!(s_[i] >= 0 && s_[i] < 1)) throw InputError("boundary_data", "sample parameter outside [0, 1)");
            if (i > 0 && !(s_[i] > s_[i - 1]))
                throw InputError("boundary_data", "sample parameters must be strictly increasing");
        }
    }

    /// m equispaced samples s_j = j/m of f.
    static BoundaryFunction sample(Evaluator f, std::size_t m, std::shared_ptr<const JordanCurve> curve = nullptr) {
        if (m == 0) throw InputError("boundary_data", "need at least one sample");
        std::vector<double> s(m);
        std::vector<Complex> v(m);
        for (std::size_t j = 0; j < m; ++j) {
            s[j] = static_cast<double>(j) / m;
            v[j] = f(s[j]);
        }
        return BoundaryFunction(std::move(s), std::move(v), std::move(curve), std::move(f));
    }

    /// Same as sample() with f given in terms of the angle theta = 2 pi s.
    static BoundaryFunction on_circle(const std::function<Complex(double)>& f_theta, std::size_t m) {
        return sample([f_theta](double s) { return f_theta(two_pi * s); }, m);
    }

    std::size_t size() const { return s_.size(); }
    const std::vector<double>& params() const { return s_; }
    const std::vector<Complex>& values() const { return v_; }
    double param(std::size_t i) const { return s_[i]; }
    Complex value(std::size_t i) const { return v_[i]; }
    bool has_evaluator() const { return static_cast<bool>(eval_); }
    const Evaluator& evaluator() const { return eval_; }
    const std::shared_ptr<const JordanCurve>& curve() const { return curve_; }

    /// Boundary point for parameter s; the unit circle when no curve is attached.
    Complex point(double s) const { return curve_ ? curve_->point(s) : std::polar(1.0, two_pi * wrap_unit(s)); }

    Complex operator()(double s) const {
        s = wrap_unit(s);
        if (eval_) return eval_(s);
        if (v_.size() == 1) return v_[0];
        auto it = std::upper_bound(s_.begin(), s_.end(), s);
        const std::size_t hi = it == s_.end() ? 0 : static_cast<std::size_t>(it - s_.begin());
        const std::size_t lo = hi == 0 ? s_.size() - 1 : hi - 1;
        const double a = s_[lo];
        double b = s_[hi], x = s;
        if (b <= a) b += 1;
        if (x < a) x += 1;
        const double u = (x - a) / (b - a);
        return v_[lo] + u * (v_[hi] - v_[lo]);
    }

    /// Values at new parameters, exact when an evaluator exists.
    BoundaryFunction resample(const std::vector<double>& params) const {
        std::vector<Complex> v(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) v[i] = (*this)(params[i]);
        return BoundaryFunction(params, std::move(v), curve_, eval_);
    }

    BoundaryFunction with_values(std::vector<Complex> v, Evaluator eval = {}) const {
        return BoundaryFunction(s_, std::move(v), curve_, std::move(eval));
    }

private:
    std::vector<double> s_;
    std::vector<Complex> v_;
    std::shared_ptr<const JordanCurve> curve_;
    Evaluator eval_;
};

/// Disjoint open parameter arcs plus the residual exceptional parameters.
/// A single arc of length 1 with no exceptional point is the whole closed
/// circle.
class ArcPartition {
public:
    struct Arc {
        double start = 0;
        double length = 1;
        double end() const { return start + length; }
        double midpoint() const { return wrap_unit(start + 0.5 * length); }
    };

    ArcPartition() : ArcPartition(circle()) {}

    ArcPartition(std::vector<Arc> arcs, std::vector<double> exceptional)
        : arcs_(std::move(arcs)), exc_(std::move(exceptional)) {
        if (arcs_.empty()) throw InputError("boundary_data", "partition needs at least one arc");
        for (auto& e : exc_) e = wrap_unit(e);
        std::sort(exc_.begin(), exc_.end());
        exc_.erase(std::unique(exc_.begin(), exc_.end(), [](double a, double b) { return b - a < 1e-14; }),
                   exc_.end());
        double total = 0;
        for (auto& a : arcs_) {
            if (!(a.length > 0 && a.length <= 1)) throw InputError("boundary_data", "arc length must lie in (0, 1]");
            a.start = wrap_unit(a.start);
            total += a.length;
        }
        if (total > 1 + 1e-12) throw InputError("boundary_data", "arcs overlap");
        if (total < 1 - 1e-12) throw InputError("boundary_data", "arcs leave a gap that is not exceptional");
        closed_ = arcs_.size() == 1 && arcs_[0].length == 1 && exc_.empty();
        if (closed_) return;
        for (std::size_t i = 0; i < arcs_.size(); ++i) {
            if (!is_exceptional(arcs_[i].start) || !is_exceptional(arcs_[i].end()))
                throw InputError("boundary_data", "arc endpoints must be exceptional");
            for (std::size_t j = 0; j < arcs_.size(); ++j) {
                if (i == j) continue;
                const double t = wrap_unit(arcs_[j].start - arcs_[i].start);
                if (t > 1e-14 && t < arcs_[i].length - 1e-14) throw InputError("boundary_data", "arcs overlap");
            }
        }
    }

    static ArcPartition circle() {
        ArcPartition p({{0.0, 1.0}}, {0.0});
        p.exc_.clear();
        p.closed_ = true;
        return p;
    }

    /// Arcs between consecutive cyclic break points; the breaks are exceptional.
    static ArcPartition from_breaks(std::vector<double> breaks) {
        if (breaks.empty()) return circle();
        for (auto& b : breaks) b = wrap_unit(b);
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        std::vector<Arc> arcs;
        for (std::size_t i = 0; i < breaks.size(); ++i) {
            const double a = breaks[i];
            const double b = i + 1 < breaks.size() ? breaks[i + 1] : breaks[0] + 1;
            arcs.push_back({a, b - a});
        }
        return ArcPartition(std::move(arcs), std::move(breaks));
    }

    const std::vector<Arc>& arcs() const { return arcs_; }
    const std::vector<double>& exceptional() const { return exc_; }
    bool closed_circle() const { return closed_; }

    bool is_exceptional(double s, double tol = 1e-12) const {
        s = wrap_unit(s);
        for (double e : exc_) {
            const double d = std::abs(s - e);
            if (std::min(d, 1 - d) <= tol) return true;
        }
        return false;
    }

    /// Index of the arc whose interior holds s, nullopt for exceptional points.
    std::optional<std::size_t> arc_of(double s) const {
        if (is_exceptional(s)) return std::nullopt;
        for (std::size_t i = 0; i < arcs_.size(); ++i) {
            const double t = wrap_unit(s - arcs_[i].start);
            if (closed_ || (t > 0 && t < arcs_[i].length)) return i;
        }
        return std::nullopt;
    }

    /// Offset of s along arc i.
    double position(std::size_t i, double s) const { return wrap_unit(s - arcs_[i].start); }

private:
    std::vector<Arc> arcs_;
    std::vector<double> exc_;
    bool closed_ = false;
};

namespace detail {

inline double chord_sum(const std::vector<Complex>& v, bool cyclic) {
    double t = 0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) t += std::abs(v[i + 1] - v[i]);
    if (cyclic && v.size() > 1) t += std::abs(v.front() - v.back());
    return t;
}

/// Sample indices lying in arc i, ordered along the arc.
inline std::vector<std::size_t> arc_indices(const BoundaryFunction& fn, const ArcPartition& part, std::size_t i) {
    std::vector<std::pair<double, std::size_t>> in;
    for (std::size_t k = 0; k < fn.size(); ++k) {
        auto a = part.arc_of(fn.param(k));
        if (a && *a == i) in.emplace_back(part.position(i, fn.param(k)), k);
    }
    std::sort(in.begin(), in.end());
    std::vector<std::size_t> out;
    for (auto& p : in) out.push_back(p.second);
    return out;
}

}  // namespace detail

/// Chord-sum variation over all samples, cyclically closed.
inline double total_variation(const BoundaryFunction& fn) { return detail::chord_sum(fn.values(), true); }

/// Chord-sum variation over the samples inside an open arc.
inline double total_variation(const BoundaryFunction& fn, const ArcPartition::Arc& arc) {
    std::vector<std::pair<double, Complex>> in;
    for (std::size_t k = 0; k < fn.size(); ++k) {
        const double t = wrap_unit(fn.param(k) - arc.start);
        if (arc.length >= 1 || (t > 0 && t < arc.length)) in.emplace_back(t, fn.value(k));
    }
    std::sort(in.begin(), in.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Complex> v;
    for (auto& p : in) v.push_back(p.second);
    return detail::chord_sum(v, false);
}

struct CBVFunction {
    BoundaryFunction base;
    ArcPartition partition;
    std::vector<double> per_arc_variation;
    double sup_variation = 0;
    double exceptional_capacity = 0;
};

inline constexpr double blowup_ratio = 0.75;

namespace detail {

/// Variation of arc i at four nested resolutions, finest last.
inline std::array<double, 4> refinement_ladder(const BoundaryFunction& fn, const ArcPartition& part, std::size_t i) {
    std::array<double, 4> V{};
    const auto& arc = part.arcs()[i];
    if (fn.has_evaluator()) {
        const std::size_t m = std::max<std::size_t>(16, arc_indices(fn, part, i).size());
        for (int lvl = 0; lvl < 4; ++lvl) {
            const std::size_t n = m << lvl;
            std::vector<Complex> v(n);
            for (std::size_t k = 0; k < n; ++k) v[k] = fn(arc.start + arc.length * (k + 0.5) / n);
            V[lvl] = chord_sum(v, part.closed_circle());
        }
        return V;
    }
    const auto idx = arc_indices(fn, part, i);
    for (int lvl = 0; lvl < 4; ++lvl) {
        const std::size_t step = std::size_t{1} << (3 - lvl);
        std::vector<Complex> v;
        for (std::size_t k = 0; k < idx.size(); k += step) v.push_back(fn.value(idx[k]));
        V[lvl] = chord_sum(v, part.closed_circle());
    }
    return V;
}

}  // namespace detail

/// Per-arc variations on the samples, with a refinement test for unbounded
/// variation and a capacity test of the exceptional set.
inline CBVFunction certify_cbv(const BoundaryFunction& fn, const ArcPartition& partition) {
    CBVFunction out{fn, partition, {}, 0, 0};
    for (std::size_t k = 0; k < fn.size(); ++k) {
        const Complex v = fn.value(k);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            if (!partition.is_exceptional(fn.param(k)))
                throw CertificationError("certify_cbv", "non-finite value at s = " + std::to_string(fn.param(k)));
        if (!partition.arc_of(fn.param(k)) && !partition.is_exceptional(fn.param(k)))
            throw InputError("certify_cbv", "sample outside every arc and not exceptional");
    }
    for (std::size_t i = 0; i < partition.arcs().size(); ++i) {
        const auto& arc = partition.arcs()[i];
        const double V = partition.closed_circle() ? total_variation(fn) : total_variation(fn, arc);
        const auto L = detail::refinement_ladder(fn, partition, i);
        const double d1 = L[1] - L[0], d2 = L[2] - L[1], d3 = L[3] - L[2];
        const bool growing = d3 > blowup_ratio * d2 && d2 > blowup_ratio * d1 && d3 > 1e-6 * (1 + L[3]);
        if (!std::isfinite(V) || !std::isfinite(L[3]) || growing)
            throw CertificationError("certify_cbv", "variation blows up under refinement on arc " + std::to_string(i) +
                                                        " [" + std::to_string(arc.start) + ", " +
                                                        std::to_string(arc.end()) + "]");
        out.per_arc_variation.push_back(std::max(V, L[3]));
    }
    out.sup_variation = *std::max_element(out.per_arc_variation.begin(), out.per_arc_variation.end());
    std::vector<Complex> pts;
    for (double e : partition.exceptional()) pts.push_back(fn.point(e));
    if (!is_negligible(pts, 1e-3, 1e-9, &out.exceptional_capacity))
        throw CertificationError("certify_cbv", "exceptional set is not negligible (capacity estimate " +
                                                    std::to_string(out.exceptional_capacity) + ")");
    return out;
}

struct ArgumentFunction {
    BoundaryFunction alpha;  // real values stored as complex
    ArcPartition partition;
    double bound = 0;        // max |alpha| over non-exceptional samples
    double theoretical_bound = 0;
    std::vector<double> per_arc_variation;

    double operator[](std::size_t i) const { return alpha.value(i).real(); }
};

inline constexpr double unimodular_tol = 1e-6;

/// Continuous phase on each arc, shifted by a multiple of 2 pi so that the
/// arc midpoint value lies in (-pi, pi]. Zero on exceptional samples.
inline ArgumentFunction argument_function(const CBVFunction& lambda) {
    const auto& fn = lambda.base;
    const auto& part = lambda.partition;
    std::vector<Complex> alpha(fn.size(), 0.0);
    for (std::size_t k = 0; k < fn.size(); ++k) {
        if (part.is_exceptional(fn.param(k))) continue;
        if (std::abs(std::abs(fn.value(k)) - 1.0) > unimodular_tol)
            throw InputError("argument_function", "|lambda| != 1 at s = " + std::to_string(fn.param(k)));
    }
    for (std::size_t i = 0; i < part.arcs().size(); ++i) {
        const auto idx = detail::arc_indices(fn, part, i);
        if (idx.empty()) continue;
        std::vector<double> a(idx.size());
        a[0] = std::arg(fn.value(idx[0]));
        for (std::size_t k = 1; k < idx.size(); ++k)
            a[k] = a[k - 1] + std::arg(fn.value(idx[k]) / fn.value(idx[k - 1]));
        if (part.closed_circle()) {
            const double close = a.back() + std::arg(fn.value(idx[0]) / fn.value(idx.back())) - a[0];
            if (std::abs(close) > 1.0)
                throw InputError("argument_function",
                                 "lambda winds around the circle; split it with an exceptional point");
        }
        // sample nearest the arc midpoint
        const double mid = 0.5 * part.arcs()[i].length;
        std::size_t km = 0;
        double best = 2;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const double d = std::abs(part.position(i, fn.param(idx[k])) - mid);
            if (d < best) {
                best = d;
                km = k;
            }
        }
        double target = wrap_angle(a[km]);
        if (target < -pi + 1e-9) target = pi;  // +pi wins the tie
        const double shift = two_pi * std::round((target - a[km]) / two_pi);
        for (std::size_t k = 0; k < idx.size(); ++k) alpha[idx[k]] = a[k] + shift;
    }
    ArgumentFunction out{fn.with_values(alpha), part, 0, pi + 1.5 * pi * lambda.sup_variation, lambda.per_arc_variation};
    for (std::size_t k = 0; k < fn.size(); ++k)
        if (!part.is_exceptional(fn.param(k))) out.bound = std::max(out.bound, std::abs(alpha[k].real()));
    return out;
}

}  // namespace qcbvp
