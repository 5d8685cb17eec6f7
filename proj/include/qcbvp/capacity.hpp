#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "qcbvp/core.hpp"

namespace qcbvp {

struct MassDistribution {
    std::vector<Complex> points;
    std::vector<double> weights;

    MassDistribution(std::vector<Complex> p, std::vector<double> w) : points(std::move(p)), weights(std::move(w)) {
        if (points.size() != weights.size()) throw InputError("capacity", "points and weights differ in length");
        double sum = 0;
        for (double x : weights) {
            if (x < 0) throw InputError("capacity", "mass weights must be nonnegative");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw InputError("capacity", "mass weights must sum to 1");
    }
};

/// Σ w_j log(1/|z − ζ_j|); +inf at a point carrying positive mass.
inline double logarithmic_potential(const MassDistribution& mass, Complex z) {
    double u = 0;
    for (std::size_t j = 0; j < mass.points.size(); ++j) {
        if (mass.weights[j] == 0) continue;
        const double d = std::abs(z - mass.points[j]);
        if (d == 0) return std::numeric_limits<double>::infinity();
        u -= mass.weights[j] * std::log(d);
    }
    return u;
}

/// log ∏_{k<l} |z_k − z_l|, −inf when two points coincide.
inline double log_vandermonde(const std::vector<Complex>& z) {
    if (z.size() < 2) throw InputError("capacity", "vandermonde product needs at least 2 points");
    double s = 0;
    for (std::size_t k = 0; k < z.size(); ++k)
        for (std::size_t l = k + 1; l < z.size(); ++l) {
            const double d = std::abs(z[k] - z[l]);
            if (d == 0) return -std::numeric_limits<double>::infinity();
            s += std::log(d);
        }
    return s;
}

inline double vandermonde_product(const std::vector<Complex>& z) { return std::exp(log_vandermonde(z)); }

struct FeketeResult {
    std::vector<std::size_t> indices;
    std::vector<Complex> points;
    double log_V = -std::numeric_limits<double>::infinity();
    double V = 0;
    int passes = 0;
    bool stagnated = false;
};

namespace detail {

/// Incremental Fekete optimizer over a fixed candidate set. S[c] holds the
/// finite part of Σ_q log|c − z_q| over chosen q, Z[c] the number of chosen
/// points at exactly the location of c.
class FeketeState {
public:
    explicit FeketeState(const std::vector<Complex>& cand) : cand_(cand), S_(cand.size(), 0.0), Z_(cand.size(), 0) {}

    void add(std::size_t c) {
        chosen_.push_back(c);
        update(c, +1);
    }

    /// Greedy insertion of the candidate maximising the product with the chosen set.
    bool insert_best() {
        std::size_t best = cand_.size();
        double bs = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cand_.size(); ++c) {
            if (Z_[c] > 0) continue;
            if (S_[c] > bs) {
                bs = S_[c];
                best = c;
            }
        }
        if (best == cand_.size()) return false;
        add(best);
        return true;
    }

    /// One sweep of single-point exchanges. Returns the number of improvements.
    int exchange_pass(double rel_tol) {
        int improved = 0;
        for (std::size_t m = 0; m < chosen_.size(); ++m) {
            const std::size_t p = chosen_[m];
            update(p, -1);
            // current contribution of p
            const double cur = Z_[p] > 0 ? -std::numeric_limits<double>::infinity() : S_[p];
            std::size_t best = p;
            double bs = cur;
            for (std::size_t c = 0; c < cand_.size(); ++c) {
                if (Z_[c] > 0) continue;
                if (S_[c] > bs) {
                    bs = S_[c];
                    best = c;
                }
            }
            const double scale = std::max(1.0, std::abs(log_V()));
            if (best != p && (bs - cur > rel_tol * scale || !std::isfinite(cur))) {
                chosen_[m] = best;
                ++improved;
            }
            update(chosen_[m], +1);
        }
        return improved;
    }

    double log_V() const {
        std::vector<Complex> z;
        for (auto c : chosen_) z.push_back(cand_[c]);
        return z.size() < 2 ? 0.0 : log_vandermonde(z);
    }

    const std::vector<std::size_t>& chosen() const { return chosen_; }

private:
    void update(std::size_t q, int sign) {
        const Complex zq = cand_[q];
        for (std::size_t c = 0; c < cand_.size(); ++c) {
            const double d = std::abs(cand_[c] - zq);
            if (d == 0) Z_[c] += sign;
            else S_[c] += sign * std::log(d);
        }
    }

    const std::vector<Complex>& cand_;
    std::vector<double> S_;
    std::vector<int> Z_;
    std::vector<std::size_t> chosen_;
};

inline std::pair<std::size_t, std::size_t> farthest_pair(const std::vector<Complex>& cand) {
    std::pair<std::size_t, std::size_t> best{0, 0};
    double bd = -1;
    for (std::size_t i = 0; i < cand.size(); ++i)
        for (std::size_t j = i + 1; j < cand.size(); ++j) {
            const double d = std::norm(cand[i] - cand[j]);
            if (d > bd) {
                bd = d;
                best = {i, j};
            }
        }
    return best;
}

inline FeketeResult finish(const std::vector<Complex>& cand, const FeketeState& st, int passes, bool stagnated) {
    FeketeResult r;
    r.indices = st.chosen();
    for (auto c : r.indices) r.points.push_back(cand[c]);
    r.log_V = st.log_V();
    r.V = std::exp(r.log_V);
    r.passes = passes;
    r.stagnated = stagnated;
    return r;
}

}  // namespace detail

inline constexpr double fekete_rel_tol = 1e-9;
inline constexpr int fekete_max_passes = 200;

/// Greedy farthest-product insertion followed by single-point exchange passes.
inline FeketeResult fekete_points(const std::vector<Complex>& candidates, std::size_t n) {
    if (candidates.empty()) throw InputError("capacity", "sampler produced no candidates");
    if (n < 2) throw InputError("capacity", "fekete_points needs n >= 2");
    if (n > candidates.size()) throw InputError("capacity", "more points requested than candidates");
    detail::FeketeState st(candidates);
    auto [a, b] = detail::farthest_pair(candidates);
    st.add(a);
    if (n >= 2) st.add(b);
    while (st.chosen().size() < n) {
        if (!st.insert_best()) st.add(st.chosen().front());  // degenerate set: repeated point
    }
    int passes = 0;
    bool stagnated = true;
    while (passes < fekete_max_passes) {
        ++passes;
        if (st.exchange_pass(fekete_rel_tol) == 0) {
            stagnated = false;
            break;
        }
    }
    return detail::finish(candidates, st, passes, stagnated);
}

struct CapacityEstimate {
    std::vector<std::size_t> n;
    std::vector<double> log_V;
    std::vector<double> tau;
    double extrapolated_tau = 0;
    bool stagnated = false;
    bool monotone = true;
    std::string note;
};

/// tau_n for n = 3..n_max with warm-started Fekete configurations, and the
/// limit from a linear fit of log tau_n − log(n)/(n−1) against 1/(n−1) over
/// the upper half of n.
inline CapacityEstimate transfinite_diameter(const std::vector<Complex>& candidates, std::size_t n_max) {
    if (n_max < 3) throw InputError("capacity", "n_max must be at least 3");
    if (candidates.empty()) throw InputError("capacity", "sampler produced no candidates");
    n_max = std::min(n_max, candidates.size());
    if (n_max < 3) throw InputError("capacity", "fewer than 3 candidate points");
    CapacityEstimate est;
    detail::FeketeState st(candidates);
    auto [a, b] = detail::farthest_pair(candidates);
    st.add(a);
    st.add(b);
    for (std::size_t n = 3; n <= n_max; ++n) {
        if (!st.insert_best()) st.add(st.chosen().front());
        int passes = 0;
        bool stag = true;
        while (passes < fekete_max_passes) {
            ++passes;
            if (st.exchange_pass(fekete_rel_tol) == 0) {
                stag = false;
                break;
            }
        }
        est.stagnated = est.stagnated || stag;
        const double lv = st.log_V();
        est.n.push_back(n);
        est.log_V.push_back(lv);
        const double t = std::isfinite(lv) ? std::exp(2.0 * lv / (static_cast<double>(n) * (n - 1))) : 0.0;
        if (!est.tau.empty() && t > est.tau.back() * (1 + 1e-6)) est.monotone = false;
        est.tau.push_back(t);
    }
    if (est.stagnated) est.note = "exchange passes hit the iteration cap";
    if (std::any_of(est.tau.begin(), est.tau.end(), [](double t) { return t == 0; })) {
        est.extrapolated_tau = 0;
        return est;
    }
    const std::size_t m = est.n.size();
    const std::size_t start = m / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t i = start; i < m; ++i) {
        const double n = static_cast<double>(est.n[i]);
        const double x = 1.0 / (n - 1);
        const double y = std::log(est.tau[i]) - std::log(n) / (n - 1);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        cnt += 1;
    }
    const double den = cnt * sxx - sx * sx;
    const double slope = den != 0 ? (cnt * sxy - sx * sy) / den : 0.0;
    est.extrapolated_tau = std::exp((sy - slope * sx) / cnt);
    return est;
}

inline std::vector<Complex> circle_sampler(Complex center, double r, std::size_t m = 2048) {
    std::vector<Complex> out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = center + r * std::polar(1.0, two_pi * j / m);
    return out;
}

/// Chebyshev–Lobatto distribution, which resolves endpoint clustering of Fekete points.
inline std::vector<Complex> segment_sampler(Complex a, Complex b, std::size_t m = 2048) {
    std::vector<Complex> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double t = 0.5 * (1 - std::cos(pi * j / (m - 1)));
        out[j] = a + t * (b - a);
    }
    return out;
}

/// Each point replaced by k points on a circle of radius eps.
inline std::vector<Complex> fattened_sampler(const std::vector<Complex>& pts, double eps, std::size_t k = 16) {
    std::vector<Complex> out;
    out.reserve(pts.size() * k);
    for (const auto& p : pts)
        for (std::size_t j = 0; j < k; ++j) out.push_back(p + eps * std::polar(1.0, two_pi * j / k));
    return out;
}

/// True iff the transfinite-diameter estimate of the eps-fattened set is below threshold.
inline bool is_negligible(const std::vector<Complex>& points, double threshold = 1e-3, double eps = 1e-9,
                          double* estimate = nullptr) {
    if (estimate) *estimate = 0;
    if (points.empty()) return true;
    auto cand = fattened_sampler(points, eps);
    const auto est = transfinite_diameter(cand, std::min<std::size_t>(12, cand.size()));
    if (estimate) *estimate = est.extrapolated_tau;
    return est.extrapolated_tau < threshold;
}

}  // namespace qcbvp
