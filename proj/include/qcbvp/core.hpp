#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcbvp {

using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr Complex I{0.0, 1.0};

/// Base of all library errors. `stage` names the pipeline step that raised it.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// Bad or inconsistent user input. Maps to CLI exit code 2.
struct InputError : Error { using Error::Error; };
// Point outside the valid region, degenerate coefficient.
struct DomainError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };
// Discretization too coarse for the requested accuracy.
struct ResolutionError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };
struct CertificationError : Error { using Error::Error; };
struct InfeasibleError : Error { using Error::Error; };

inline double wrap_angle(double a) {
    // into (-pi, pi]
    a = std::remainder(a, two_pi);
    if (a <= -pi) a += two_pi;
    return a;
}

inline double wrap_unit(double s) {
    s -= std::floor(s);
    if (s >= 1.0) s = 0.0;
    return s;
}

inline double wrap_two_pi(double t) {
    t = std::fmod(t, two_pi);
    if (t < 0) t += two_pi;
    if (t >= two_pi) t = 0.0;
    return t;
}

/// Neville extrapolation to x = 0 of samples (x_i, y_i). Returns the top
/// entry and the difference to the best lower-order estimate.
inline std::pair<Complex, double> neville_at_zero(const std::vector<double>& x,
                                                  const std::vector<Complex>& y) {
    const std::size_t n = x.size();
    std::vector<Complex> p = y;
    Complex prev = y.back();
    for (std::size_t m = 1; m < n; ++m) {
        for (std::size_t i = 0; i + m < n; ++i) {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
        if (m == n - 1) break;
        prev = p[n - m - 1];
    }
    return {p[0], std::abs(p[0] - prev)};
}

}  // namespace qcbvp
