#pragma once

#include <vector>

#include "llab/common.hpp"

namespace llab {

// In-place iterative radix-2 complex FFT, power-of-two lengths only
// (surface grids are required to be powers of two).
// sign = -1: forward (e^{-2pi i kn/N}), sign = +1: inverse without the 1/N.
void fft_inplace(cplx* data, int n, int sign);

// 2-D transform over a row-major n x n array.
void fft2_inplace(cplx* data, int n, int sign);

// Inverse 2-D with 1/N^2 normalization.
void ifft2_normalized(cplx* data, int n);

class Fft2Workspace {
  public:
    explicit Fft2Workspace(int n) : n_(n), buf_(std::size_t(n) * n) {
        if (!is_pow2(n)) throw ConfigError("fft: grid size must be a power of two");
    }
    int n() const { return n_; }
    std::vector<cplx>& buf() { return buf_; }
    // spectrum (row-major, wavenumber index k in [0,n), k > n/2 means k-n)
    // -> real grid values; writes |grid| = n*n doubles.
    void synthesize_real(const cplx* spectrum, double* grid);

  private:
    int n_;
    std::vector<cplx> buf_;
};

// wavenumber of index i on an n-grid, in [-n/2, n/2)
inline int fft_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace llab
