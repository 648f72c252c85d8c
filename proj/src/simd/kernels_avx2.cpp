// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; callers reach it through the dispatch table.
#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

#include "llab/simd.hpp"

namespace llab::simd {
namespace {

// Cephes-style expm reduction: x = k*ln2 + r, exp(r) via rational approx.
// Accurate to ~1 ulp on the clamped range.
inline __m256d exp4(__m256d x) {
    const __m256d hi = _mm256_set1_pd(709.0);
    const __m256d lo = _mm256_set1_pd(-708.0);
    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

    __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(k, c1, x);
    r = _mm256_fnmadd_pd(k, c2, r);
    __m256d r2 = _mm256_mul_pd(r, r);

    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

    __m256d px = _mm256_fmadd_pd(p0, r2, p1);
    px = _mm256_fmadd_pd(px, r2, p2);
    px = _mm256_mul_pd(px, r);
    __m256d qx = _mm256_fmadd_pd(q0, r2, q1);
    qx = _mm256_fmadd_pd(qx, r2, q2);
    qx = _mm256_fmadd_pd(qx, r2, q3);

    __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

    // scale by 2^k through the exponent bits
    __m128i ki = _mm256_cvtpd_epi32(k);
    __m256i k64 = _mm256_cvtepi32_epi64(ki);
    k64 = _mm256_slli_epi64(k64, 52);
    __m256i bits = _mm256_add_epi64(_mm256_castpd_si256(e), k64);
    return _mm256_castsi256_pd(bits);
}

inline double hsum4(__m256d v) {
    __m128d s = _mm_add_pd(_mm256_castpd256_pd128(v),
                           _mm256_extractf128_pd(v, 1));
    s = _mm_add_pd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
}

void exp_v_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, exp4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = std::exp(x[i]);
}

double exp_weighted_sum_avx2(const double* x, const double* w, double* dens,
                             std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    if (dens) {
        for (; i + 4 <= n; i += 4) {
            __m256d d = _mm256_mul_pd(_mm256_loadu_pd(w + i),
                                      exp4(_mm256_loadu_pd(x + i)));
            _mm256_storeu_pd(dens + i, d);
            acc = _mm256_add_pd(acc, d);
        }
    } else {
        for (; i + 4 <= n; i += 4) {
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i),
                                  exp4(_mm256_loadu_pd(x + i)), acc);
        }
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        double d = w[i] * std::exp(x[i]);
        if (dens) dens[i] = d;
        tail += d;
    }
    return hsum4(acc) + tail;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                              acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return hsum4(acc) + tail;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                     _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double dot3_avx2(const double* a, const double* b, const double* c,
                 std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                   _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i] * c[i];
    return hsum4(acc) + tail;
}

}  // namespace

const Kernels* avx2_kernels() {
    static const Kernels k{exp_v_avx2, exp_weighted_sum_avx2, dot_avx2,
                           axpy_avx2, dot3_avx2, "avx2"};
    return &k;
}

}  // namespace llab::simd

#else

#include "llab/simd.hpp"

namespace llab::simd {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace llab::simd

#endif
