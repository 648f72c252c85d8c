#include "llab/gff.hpp"

#include <cmath>

#include "llab/simd.hpp"

namespace llab::gff {

GffSample sample_gff(const SpectralBasis& b, SeedInfo seed) {
    GffSample s;
    s.seed = seed;
    s.coeff.resize(b.num_modes());
    PhiloxStream stream(seed.root_seed, seed.stream);
    int n = 0;
    for (; n + 1 < b.num_modes(); n += 2)
        stream.normal_pair(n / 2, s.coeff[n], s.coeff[n + 1]);
    if (n < b.num_modes()) {
        double z0, z1;
        stream.normal_pair(n / 2, z0, z1);
        s.coeff[n] = z0;
    }
    return s;
}

std::vector<double> field_coefficients(const SpectralBasis& b,
                                       const GffSample& s) {
    std::vector<double> c(s.coeff.size());
    for (int n = 0; n < b.num_modes(); ++n)
        c[n] = std::sqrt(two_pi / b.lambda(n)) * s.coeff[n];
    return c;
}

std::vector<double> field_grid(const SpectralBasis& b, const GffSample& s) {
    return b.synthesize(field_coefficients(b, s));
}

std::vector<double> field_grid_averaged(const SpectralBasis& b,
                                        const GffSample& s, double delta) {
    if (delta < 2.0 * b.surface().spacing())
        throw ResolutionError("field_grid_averaged: delta below resolution");
    auto c = field_coefficients(b, s);
    auto mult = b.circle_multiplier(delta);
    for (int n = 0; n < b.num_modes(); ++n) c[n] *= mult[n];
    return b.synthesize(c);
}

double pair_field(const SpectralBasis& b, const GffSample& s,
                  const std::vector<double>& f) {
    // quadrature of X f dv; identical to the coefficient-space pairing with
    // the quadrature projections of f (finite sums, no approximation step)
    auto proj = b.project(f);
    auto c = field_coefficients(b, s);
    return simd::active().dot(proj.data(), c.data(), proj.size());
}

double circle_average(const SpectralBasis& b, const GffSample& s,
                      const Point& x, double delta) {
    if (delta < 2.0 * b.surface().spacing())
        throw ResolutionError("circle_average: delta below resolution");
    auto c = field_coefficients(b, s);
    auto mult = b.circle_multiplier(delta);
    std::vector<double> evals(b.num_modes());
    b.eval_all(x, evals.data());
    double acc = 0.0;
    for (int n = 0; n < b.num_modes(); ++n) acc += c[n] * mult[n] * evals[n];
    return acc;
}

}  // namespace llab::gff
