#pragma once

// Thin RAII wrappers over FFTW. Plans use FFTW_ESTIMATE so results do not
// depend on timing measurements.

#include <fftw3.h>

#include <cstring>
#include <vector>

#include "qcbvp/core.hpp"

namespace qcbvp {

class FftBuffer {
public:
    explicit FftBuffer(std::size_t n) : n_(n) {
        data_ = reinterpret_cast<Complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        if (!data_) throw std::bad_alloc();
        std::memset(static_cast<void*>(data_), 0, sizeof(fftw_complex) * n);
    }
    ~FftBuffer() { fftw_free(data_); }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;

    Complex* data() { return data_; }
    const Complex* data() const { return data_; }
    std::size_t size() const { return n_; }
    Complex& operator[](std::size_t i) { return data_[i]; }
    const Complex& operator[](std::size_t i) const { return data_[i]; }
    void zero() { std::memset(static_cast<void*>(data_), 0, sizeof(fftw_complex) * n_); }
    fftw_complex* raw() { return reinterpret_cast<fftw_complex*>(data_); }

private:
    std::size_t n_;
    Complex* data_;
};

/// In-place 1D or 2D transform on a caller-owned buffer.
class FftPlan {
public:
    FftPlan(FftBuffer& buf, int sign) : FftPlan(buf, static_cast<int>(buf.size()), 1, sign) {}
    FftPlan(FftBuffer& buf, int rows, int cols, int sign) {
        if (cols == 1)
            plan_ = fftw_plan_dft_1d(rows, buf.raw(), buf.raw(), sign, FFTW_ESTIMATE);
        else
            plan_ = fftw_plan_dft_2d(rows, cols, buf.raw(), buf.raw(), sign, FFTW_ESTIMATE);
        if (!plan_) throw Error("fft", "plan creation failed");
    }
    ~FftPlan() { fftw_destroy_plan(plan_); }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    void execute() { fftw_execute(plan_); }

private:
    fftw_plan plan_;
};

/// Forward DFT with 1/n scaling: c_k = (1/n) Σ x_j e^{-2πijk/n}.
inline std::vector<Complex> dft_forward(const std::vector<Complex>& x) {
    const std::size_t n = x.size();
    FftBuffer buf(n);
    FftPlan plan(buf, FFTW_FORWARD);
    for (std::size_t j = 0; j < n; ++j) buf[j] = x[j];
    plan.execute();
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = buf[k] / static_cast<double>(n);
    return out;
}

/// Unscaled inverse: x_j = Σ c_k e^{2πijk/n}.
inline std::vector<Complex> dft_inverse(const std::vector<Complex>& c) {
    const std::size_t n = c.size();
    FftBuffer buf(n);
    FftPlan plan(buf, FFTW_BACKWARD);
    for (std::size_t j = 0; j < n; ++j) buf[j] = c[j];
    plan.execute();
    return std::vector<Complex>(buf.data(), buf.data() + n);
}

}  // namespace qcbvp
