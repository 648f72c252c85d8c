#pragma once

#include <vector>

#include "llab/gff.hpp"

namespace llab::gmc {

using gff::GffSample;
using spectral::SpectralBasis;

// Cell-mass approximation of the chaos measure at regularization scale delta.
// Masses use the exact-variance Wick normalization times e^{(gamma^2/2) m_hat}
// with m_hat = Var[X_delta] + ln delta, which collapses to the
// delta^{gamma^2/2} e^{gamma X_delta} form identically.
struct GmcMeasure {
    std::vector<double> mass;
    double gamma = 0.0;
    double delta = 0.0;
    double total = 0.0;
    double var_delta = 0.0;  // subtracted variance (normalization record)
    double m_hat = 0.0;      // var_delta + ln delta
};

GmcMeasure gmc_measure(const SpectralBasis& b, const GffSample& s, double gamma,
                       double delta);

// mass of a union of grid cells (exactly additive)
double region_mass(const GmcMeasure& m, const std::vector<std::size_t>& cells);

struct ConvergenceReport {
    std::vector<double> deltas;
    std::vector<double> totals;
    std::vector<double> increments;  // |total_k - total_{k-1}|
    double tail_index = 0.0;         // Hill estimate over the top masses
    bool heavy_tail_flag = false;
};

ConvergenceReport gmc_convergence(const SpectralBasis& b, const GffSample& s,
                                  double gamma,
                                  const std::vector<double>& deltas);

}  // namespace llab::gmc
