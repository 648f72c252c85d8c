#include "llab/fft.hpp"

#include <utility>

namespace llab {

namespace {
// twiddle cache per (n, sign)
const std::vector<cplx>& twiddles(int n, int sign) {
    thread_local std::vector<cplx> cache_m, cache_p;
    thread_local int cached_n_m = 0, cached_n_p = 0;
    auto& cache = sign < 0 ? cache_m : cache_p;
    int& cached_n = sign < 0 ? cached_n_m : cached_n_p;
    if (cached_n != n) {
        cache.resize(n / 2);
        for (int i = 0; i < n / 2; ++i) {
            double a = sign * two_pi * i / n;
            cache[i] = cplx(std::cos(a), std::sin(a));
        }
        cached_n = n;
    }
    return cache;
}
}  // namespace

void fft_inplace(cplx* a, int n, int sign) {
    if (n == 1) return;
    // bit reversal
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto& tw = twiddles(n, sign);
    for (int len = 2; len <= n; len <<= 1) {
        int step = n / len;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < len / 2; ++k) {
                cplx w = tw[std::size_t(k) * step];
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

void fft2_inplace(cplx* data, int n, int sign) {
    for (int r = 0; r < n; ++r) fft_inplace(data + std::size_t(r) * n, n, sign);
    std::vector<cplx> col(n);
    for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) col[r] = data[std::size_t(r) * n + c];
        fft_inplace(col.data(), n, sign);
        for (int r = 0; r < n; ++r) data[std::size_t(r) * n + c] = col[r];
    }
}

void ifft2_normalized(cplx* data, int n) {
    fft2_inplace(data, n, +1);
    double s = 1.0 / (double(n) * n);
    for (std::size_t i = 0; i < std::size_t(n) * n; ++i) data[i] *= s;
}

void Fft2Workspace::synthesize_real(const cplx* spectrum, double* grid) {
    // spectrum holds coefficients of e^{2pi i k.x}; values are the plain
    // inverse transform without normalization.
    std::size_t nn = std::size_t(n_) * n_;
    for (std::size_t i = 0; i < nn; ++i) buf_[i] = spectrum[i];
    fft2_inplace(buf_.data(), n_, +1);
    for (std::size_t i = 0; i < nn; ++i) grid[i] = buf_[i].real();
}

}  // namespace llab
