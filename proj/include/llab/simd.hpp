#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner-loop kernels. Every kernel has a scalar reference
// implementation and an AVX2+FMA variant; the active one is picked at load
// time from cpuid. Set LLAB_SIMD=scalar (or avx2) to force a path; the
// equivalence tests run both and compare.
namespace llab::simd {

struct Kernels {
    // y[i] = exp(x[i])
    void (*exp_v)(const double* x, double* y, std::size_t n);
    // returns sum_i w[i] * exp(x[i]); also writes dens[i] = w[i]*exp(x[i])
    // when dens != nullptr (chaos-measure cell masses).
    double (*exp_weighted_sum)(const double* x, const double* w, double* dens,
                               std::size_t n);
    // plain dot product, fixed evaluation order within lanes
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // sum_i a[i]*b[i]*c[i]  (triple-product reductions in quadratures)
    double (*dot3)(const double* a, const double* b, const double* c,
                   std::size_t n);
    const char* name;
};

// Active kernel table (dispatch decided once, thread safe).
const Kernels& active();

// Specific tables, for equivalence testing.
const Kernels& scalar_kernels();
bool have_avx2();
const Kernels* avx2_kernels();  // nullptr when unsupported

}  // namespace llab::simd
