#include <cmath>

#include "llab/simd.hpp"

namespace llab::simd {
namespace {

void exp_v_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

double exp_weighted_sum_scalar(const double* x, const double* w, double* dens,
                               std::size_t n) {
    double acc = 0.0;
    if (dens) {
        for (std::size_t i = 0; i < n; ++i) {
            double d = w[i] * std::exp(x[i]);
            dens[i] = d;
            acc += d;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) acc += w[i] * std::exp(x[i]);
    }
    return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot3_scalar(const double* a, const double* b, const double* c,
                   std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i] * c[i];
    return acc;
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k{exp_v_scalar, exp_weighted_sum_scalar, dot_scalar,
                           axpy_scalar, dot3_scalar, "scalar"};
    return k;
}

}  // namespace llab::simd
