#pragma once

#include <vector>

#include "llab/lcft.hpp"

namespace llab::ward {

using geometry::Point;
using geometry::Surface;
using geometry::SurfaceKind;
using geometry::TensorField2;
using lcft::CorrelatorSpec;
using lcft::McParams;
using lcft::Sampler;

// --- complex-analytic kernels ----------------------------------------------

// Plane-box Cauchy transform (C f)(z) = (1/pi) Int f(w)/(z - w) d^2w of a
// field sampled on an n x n grid over [0, box)^2 and compactly supported in
// the interior; evaluated by zero-padded FFT convolution against exact kernel
// samples, so the result carries true plane (non-periodic) behavior.
std::vector<cplx> cauchy_transform_plane(const std::vector<cplx>& f, int n,
                                         double box);

// Torus variant: spectral inverse of d/dzbar on mean-zero input. If the mean
// is nonzero it is removed and reported only when project_mean is set,
// otherwise the call is a domain error.
struct TorusCauchyResult {
    std::vector<cplx> u;
    cplx removed_mean{};
};
TorusCauchyResult cauchy_transform_torus(const std::vector<cplx>& f, int n,
                                         bool project_mean = false);

// Perturbation kernels of the delta-metric bump at z in a conformal chart:
//   psi_dot(w) = -(1/4pi) / (w - z)
//   omega_dot(w) = (1/4pi) (1/(w-z)^2 + d sigma(w)/(w-z))
// Consistency: omega_dot = (d/dw - d sigma(w)) psi_dot, which the struct
// reports as a residual over the evaluation grid.
struct DeltaKernels {
    std::vector<cplx> psi_dot;
    std::vector<cplx> omega_dot;
    double consistency_residual = 0.0;
};
DeltaKernels delta_perturbation_kernels(
    const Surface& s, const Point& z,
    const std::vector<cplx>& dsigma_grid = {});

// Linear Beltrami solve d/dzbar psi = mu d/dz psi by Neumann iteration
// psi = id + C(h), h = mu(1 + B h), on the unit periodic box; mu band
// limited with ||mu||_inf <= 0.2.
struct BeltramiResult {
    std::vector<cplx> psi;       // map values on the grid (including id)
    std::vector<cplx> dpsi;      // d/dz psi
    std::vector<cplx> dbar_psi;  // d/dzbar psi
    double residual = 0.0;       // sup |h - mu(1 + B h)| at the final order
    std::vector<double> residual_by_order;
    int order = 0;
};
BeltramiResult beltrami_solve_linear(const std::vector<cplx>& mu, int n,
                                     int order = 12);

// Inverse of the conformal Killing operator on the flat torus: returns the
// vector field u with 2 grad^z u^z = -(f - f_m), u mean free; f_m is the
// constant (moduli) mode.
struct KillingResult {
    std::vector<cplx> u;     // u^z on the grid
    cplx moduli_mode{};      // the projected-out constant of f^{zz}
};
KillingResult killing_inverse(const Surface& s, const TensorField2& f);

// --- stress-energy field -----------------------------------------------------

// Per-z-point machinery for the Wick-ordered stress-energy field
//   T(z) = Q d^2(X + Q sigma/2) - (d(X + Q sigma/2))^2 + E[(dX)^2]
//          + (1/12)(d^2 sigma - (d sigma)^2/2)
// evaluated on the truncated field (derivatives exact in the spectral
// representation). The shift argument adds a deterministic field (the
// Girsanov mean) before evaluation.
class SeField {
  public:
    SeField(const Sampler& smp, const Point& z, double q);

    // value on the sample currently held in w (after smp.synthesize)
    cplx value(const Sampler::Work& w, cplx shift_d1 = 0.0,
               cplx shift_d2 = 0.0) const;

    cplx expect_dx_sq() const { return e_dx2_; }
    const Point& z() const { return z_; }

  private:
    Point z_;
    double q_;
    std::vector<double> d1r_, d1i_, d2r_, d2i_;  // eval vectors
    cplx e_dx2_{};
    cplx dsig_{}, ddsig_{};
    double t_sigma_ = 0.0;
};

// deterministic covariance oracle E[T(z) T(w)] of the pure field
cplx se_two_point_oracle(const Sampler& smp, const Point& z, const Point& w,
                         double q);
// deterministic Cov[T(z), (X,f)] = Q d^2(Gf)(z) - 2 (Q/2) d sigma d(Gf)(z)
cplx se_pair_oracle(const Sampler& smp, const Point& z,
                    const std::vector<double>& f_coeff, double q);

// --- Ward identity (n = 1, sphere) ------------------------------------------

struct WardPoint {
    cplx z;
    cplx lhs, rhs;
    double lhs_err = 0.0, rhs_err = 0.0;
    double rel_dev = 0.0;
};

struct PvLevel {
    double r = 0.0;
    cplx pot;          // reconstructed potential term (excised + inner)
    double err = 0.0;  // jackknife stderr of |pot|-components
};

struct WardReport {
    std::vector<WardPoint> points;
    std::vector<PvLevel> pv;     // r, r/2, r/4 for the first insertion
    cplx pot_direct;             // full-range absolutely convergent reduction
    double pot_direct_err = 0.0;
    bool pv_stable = false;
    std::uint64_t samples = 0;
};

WardReport ward_n1_check(const CorrelatorSpec& spec,
                         const std::vector<cplx>& z_list,
                         const McParams& params, double pv_radius = 0.35,
                         std::uint64_t pv_samples = 0);

}  // namespace llab::ward
