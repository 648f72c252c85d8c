#pragma once

#include <cstdint>
#include <vector>

#include "llab/rng.hpp"
#include "llab/spectral.hpp"

namespace llab::gff {

using spectral::Point;
using spectral::SpectralBasis;

struct SeedInfo {
    std::uint64_t root_seed = 0;
    std::uint64_t stream = 0;
};

// One Karhunen-Loeve realization: i.i.d. standard normal coefficients a_n,
// X = sqrt(2 pi) sum a_n e_n / sqrt(lambda_n).
struct GffSample {
    std::vector<double> coeff;
    SeedInfo seed;
};

GffSample sample_gff(const SpectralBasis& b, SeedInfo seed);

// KL coefficients scaled into field coefficients sqrt(2 pi / lambda_n) a_n
std::vector<double> field_coefficients(const SpectralBasis& b,
                                       const GffSample& s);

// pointwise field on the surface grid
std::vector<double> field_grid(const SpectralBasis& b, const GffSample& s);

// delta-circle-averaged field on the surface grid
std::vector<double> field_grid_averaged(const SpectralBasis& b,
                                        const GffSample& s, double delta);

// quadrature of X f dv_g
double pair_field(const SpectralBasis& b, const GffSample& s,
                  const std::vector<double>& f);

// circle average of the sampled field at x
double circle_average(const SpectralBasis& b, const GffSample& s,
                      const Point& x, double delta);

}  // namespace llab::gff
