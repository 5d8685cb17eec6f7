#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include "qcbvp/core.hpp"
#include "qcbvp/fft.hpp"

namespace qcbvp {

/// Complex values at the cell centres of an n x n grid covering [-L, L]^2.
/// Row-major with j (imaginary axis) as the row index.
class GridField {
public:
    GridField() = default;
    GridField(std::size_t n, double L) : n_(n), L_(L), h_(2 * L / n), v_(n * n, 0.0) {
        if (n < 4) throw InputError("grid", "grid needs at least 4 cells per side");
        if (!(L > 0)) throw InputError("grid", "grid extent must be positive");
    }

    /// Cell averages of f from s x s subsamples per cell (s = 1 samples the centre).
    static GridField sample(const std::function<Complex(Complex)>& f, std::size_t n, double L, int s = 1) {
        GridField g(n, L);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                Complex acc = 0;
                for (int b = 0; b < s; ++b)
                    for (int a = 0; a < s; ++a) {
                        const Complex off((a + 0.5) / s - 0.5, (b + 0.5) / s - 0.5);
                        acc += f(g.point(i, j) + g.h_ * off);
                    }
                g(i, j) = acc / static_cast<double>(s * s);
            }
        return g;
    }

    std::size_t n() const { return n_; }
    double extent() const { return L_; }
    double spacing() const { return h_; }
    double coord(std::size_t i) const { return -L_ + (static_cast<double>(i) + 0.5) * h_; }
    Complex point(std::size_t i, std::size_t j) const { return {coord(i), coord(j)}; }

    Complex& operator()(std::size_t i, std::size_t j) { return v_[j * n_ + i]; }
    const Complex& operator()(std::size_t i, std::size_t j) const { return v_[j * n_ + i]; }
    std::vector<Complex>& data() { return v_; }
    const std::vector<Complex>& data() const { return v_; }

    bool inside(Complex z) const {
        const double lo = coord(0), hi = coord(n_ - 1);
        return z.real() >= lo && z.real() <= hi && z.imag() >= lo && z.imag() <= hi;
    }

    /// Bilinear interpolation between cell centres.
    Complex interpolate(Complex z) const {
        if (!inside(z)) throw DomainError("grid", "point outside the grid");
        const double x = (z.real() + L_) / h_ - 0.5, y = (z.imag() + L_) / h_ - 0.5;
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x), n_ - 2);
        const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(y), n_ - 2);
        const double fx = x - i, fy = y - j;
        return (1 - fy) * ((1 - fx) * (*this)(i, j) + fx * (*this)(i + 1, j)) +
               fy * ((1 - fx) * (*this)(i, j + 1) + fx * (*this)(i + 1, j + 1));
    }

    double sup_norm() const {
        double m = 0;
        for (const auto& x : v_) m = std::max(m, std::abs(x));
        return m;
    }
    double l2_norm() const {
        double s = 0;
        for (const auto& x : v_) s += std::norm(x);
        return std::sqrt(s) * h_;
    }
    /// Largest |z| over cells with nonzero value.
    double support_radius() const {
        double r = 0;
        for (std::size_t j = 0; j < n_; ++j)
            for (std::size_t i = 0; i < n_; ++i)
                if ((*this)(i, j) != 0.0) r = std::max(r, std::abs(point(i, j)));
        return r;
    }
    /// True when a cell of the outermost ring carries a nonzero value.
    bool touches_boundary() const {
        for (std::size_t k = 0; k < n_; ++k)
            if ((*this)(k, 0) != 0.0 || (*this)(k, n_ - 1) != 0.0 || (*this)(0, k) != 0.0 || (*this)(n_ - 1, k) != 0.0)
                return true;
        return false;
    }

    GridField& operator+=(const GridField& o) {
        check(o);
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        return *this;
    }
    GridField& operator-=(const GridField& o) {
        check(o);
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
        return *this;
    }
    GridField& operator*=(Complex c) {
        for (auto& x : v_) x *= c;
        return *this;
    }
    /// Pointwise product.
    GridField& operator*=(const GridField& o) {
        check(o);
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] *= o.v_[k];
        return *this;
    }
    friend GridField operator+(GridField a, const GridField& b) { return a += b; }
    friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
    friend GridField operator*(GridField a, const GridField& b) { return a *= b; }
    friend GridField operator*(Complex c, GridField a) { return a *= c; }

    bool same_grid(const GridField& o) const { return n_ == o.n_ && L_ == o.L_; }

private:
    void check(const GridField& o) const {
        if (!same_grid(o)) throw InputError("grid", "fields live on different grids");
    }
    std::size_t n_ = 0;
    double L_ = 0, h_ = 0;
    std::vector<Complex> v_;
};

namespace detail {

// Exact integrals over the rectangle [x1, x2] x [y1, y2] (origin not a corner).
inline double rect(const std::function<double(double, double)>& F, double x1, double x2, double y1, double y2) {
    return F(x2, y2) - F(x1, y2) - F(x2, y1) + F(x1, y1);
}

/// (1/pi) * integral of 1/u over the rectangle.
inline Complex cauchy_cell(double x1, double x2, double y1, double y2) {
    // d2P/dxdy = x/r^2, d2Q/dxdy = y/r^2
    auto P = [](double x, double y) { return 0.5 * y * std::log(x * x + y * y) + x * std::atan(y / x); };
    auto Q = [](double x, double y) { return 0.5 * x * std::log(x * x + y * y) + y * std::atan(x / y); };
    return Complex(rect(P, x1, x2, y1, y2), -rect(Q, x1, x2, y1, y2)) / pi;
}

/// -(1/pi) * integral of 1/u^2 over the rectangle, x1, x2 != 0.
inline Complex beurling_cell(double x1, double x2, double y1, double y2) {
    auto G = [&](double x) {
        auto prim = [x](double y) { return Complex(std::atan(y / x), -0.5 * std::log(x * x + y * y)); };
        return prim(y2) - prim(y1);
    };
    return (G(x2) - G(x1)) / pi;
}

}  // namespace detail

/// Convolution with a cell-integrated kernel on a zero-padded 2n x 2n FFT grid.
class GridConvolution {
public:
    enum class Kind { Cauchy, Beurling };

    GridConvolution(std::size_t n, double L, Kind kind) : n_(n), L_(L), kind_(kind), khat_(4 * n * n), work_(4 * n * n) {
        const std::size_t m = 2 * n;
        const double h = 2 * L / n;
        for (std::size_t b = 0; b < m; ++b)
            for (std::size_t a = 0; a < m; ++a) {
                const long da = a < n ? static_cast<long>(a) : static_cast<long>(a) - static_cast<long>(m);
                const long db = b < n ? static_cast<long>(b) : static_cast<long>(b) - static_cast<long>(m);
                Complex w = 0;
                if (!(da == 0 && db == 0) && std::abs(da) < static_cast<long>(n) && std::abs(db) < static_cast<long>(n)) {
                    const double x1 = (da - 0.5) * h, x2 = (da + 0.5) * h, y1 = (db - 0.5) * h, y2 = (db + 0.5) * h;
                    w = kind == Kind::Cauchy ? detail::cauchy_cell(x1, x2, y1, y2) : detail::beurling_cell(x1, x2, y1, y2);
                }
                khat_[b * m + a] = w;
            }
        FftPlan p(khat_, static_cast<int>(m), static_cast<int>(m), FFTW_FORWARD);
        p.execute();
        fwd_ = std::make_unique<FftPlan>(work_, static_cast<int>(m), static_cast<int>(m), FFTW_FORWARD);
        bwd_ = std::make_unique<FftPlan>(work_, static_cast<int>(m), static_cast<int>(m), FFTW_BACKWARD);
    }

    std::size_t n() const { return n_; }
    double extent() const { return L_; }
    Kind kind() const { return kind_; }

    GridField apply(const GridField& f) {
        if (f.n() != n_ || f.extent() != L_) throw InputError("grid", "field does not match the kernel grid");
        const std::size_t m = 2 * n_;
        work_.zero();
        for (std::size_t j = 0; j < n_; ++j)
            for (std::size_t i = 0; i < n_; ++i) work_[j * m + i] = f(i, j);
        fwd_->execute();
        const double scale = 1.0 / static_cast<double>(m * m);
        for (std::size_t k = 0; k < m * m; ++k) work_[k] *= khat_[k] * scale;
        bwd_->execute();
        GridField out(n_, L_);
        for (std::size_t j = 0; j < n_; ++j)
            for (std::size_t i = 0; i < n_; ++i) out(i, j) = work_[j * m + i];
        return out;
    }

private:
    std::size_t n_;
    double L_;
    Kind kind_;
    FftBuffer khat_, work_;
    std::unique_ptr<FftPlan> fwd_, bwd_;
};

/// Flags set when an input touches the outermost ring of cells.
struct TransformInfo {
    bool truncated = false;
};

/// F(z) = (1/pi) \iint f(zeta)/(z - zeta) dA, so that F_zbar = f.
inline GridField cauchy_transform(const GridField& f, TransformInfo* info = nullptr) {
    if (info) info->truncated = f.touches_boundary();
    GridConvolution c(f.n(), f.extent(), GridConvolution::Kind::Cauchy);
    return c.apply(f);
}

/// Sf(z) = -(1/pi) p.v. \iint f(zeta)/(z - zeta)^2 dA.
inline GridField beurling_transform(const GridField& f, TransformInfo* info = nullptr) {
    if (info) info->truncated = f.touches_boundary();
    GridConvolution c(f.n(), f.extent(), GridConvolution::Kind::Beurling);
    return c.apply(f);
}

}  // namespace qcbvp
