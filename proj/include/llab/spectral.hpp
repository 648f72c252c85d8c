#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "llab/geometry.hpp"

namespace llab::spectral {

using geometry::Point;
using geometry::Surface;
using geometry::SurfaceKind;
using geometry::TensorField2;
using geometry::WeylFactor;

// Laplace-Beltrami eigenbasis in closed form: plane-wave pairs
// sqrt(2)cos/sin(2 pi k.x) on the torus (|k| <= cutoff, lambda = 4 pi^2 |k|^2),
// real spherical harmonics on the sphere (l <= cutoff, lambda = l(l+1)).
// The constant mode is excluded throughout.
class SpectralBasis {
  public:
    static SpectralBasis build(const Surface& s, int cutoff);

    const Surface& surface() const { return *surf_; }
    int cutoff() const { return cutoff_; }
    int num_modes() const { return int(lambda_.size()); }
    double lambda(int n) const { return lambda_[n]; }
    const std::vector<double>& lambdas() const { return lambda_; }

    // torus mode table: (kx, ky, is_sin); sphere: (l, m, is_sin)
    struct ModeId {
        int a = 0, b = 0;
        bool is_sin = false;
    };
    const std::vector<ModeId>& modes() const { return mode_; }

    double eval(int n, const Point& p) const;
    void eval_all(const Point& p, double* out) const;
    // chart derivatives d/dz and d^2/dz^2 of every mode at p
    void eval_derivs(const Point& p, cplx* d1, cplx* d2) const;

    // e_n sampled on the surface grid
    std::vector<double> mode_grid(int n) const;

    // quadrature projections <e_n, f>_g for all modes
    std::vector<double> project(const std::vector<double>& f) const;

    // synthesize sum_n c_n e_n on the surface grid
    std::vector<double> synthesize(const std::vector<double>& coeff) const;

    // truncated zero-mean Green function 2 pi sum e_n(x) e_n(y)/lambda_n
    double green(const Point& x, const Point& y) const;
    // G(x, .) sampled on the grid
    std::vector<double> green_field(const Point& x) const;

    // stencil multiplier of the delta-circle average per mode
    std::vector<double> circle_multiplier(double delta) const;

    // independent M-point trapezoid circle average of a sampled closure
    // (used by tests to pin the multiplier form)
    static constexpr int kCirclePoints = 64;
    std::vector<Point> circle_points(const Point& x, double delta) const;

  private:
    std::shared_ptr<const Surface> surf_;
    int cutoff_ = 0;
    std::vector<double> lambda_;
    std::vector<ModeId> mode_;
    // sphere: cached fully-normalized Legendre recurrence workspace sizes
    void eval_sphere_all(const Point& p, double* out) const;
    void eval_torus_all(const Point& p, double* out) const;
};

// --- Poisson / Green operations ------------------------------------------

struct PoissonResult {
    std::vector<double> u;
    double removed_mean = 0.0;
};
// Solve Delta_g u = -2 pi rho (rho projected to mean zero; the removed mean
// is reported), u mean zero, spectral truncation at the basis cutoff.
PoissonResult poisson_solve(const SpectralBasis& b,
                            const std::vector<double>& rho);

// Closed-form continuum Green function of the base metrics (Jacobi theta on
// the square torus, -ln sin(d/2) - 1/2 on the round sphere) and its chart
// derivative in the first argument. These are the exact kernels entering the
// variation quadratures; the truncated `green` remains the covariance of the
// sampled field.
double green_exact(const geometry::Surface& s, const Point& x, const Point& y);
cplx green_exact_dz(const geometry::Surface& s, const Point& x,
                    const Point& y);
cplx green_exact_dz2(const geometry::Surface& s, const Point& x,
                     const Point& y);

// Four-term Weyl transformation of the Green function, all integrals by
// quadrature on the surface grid.
double green_weyl(const SpectralBasis& b, const WeylFactor& omega,
                  const Point& x, const Point& y);

// First variation of G under the inverse-metric perturbation f (quadrature of
// the variation kernel; cells near x and y switch to polar patches with the
// analytic log-derivative factored out).
double green_variation(const SpectralBasis& b, const TensorField2& f,
                       const Point& x, const Point& y);

// Composed-kernel form of the mixed second variation for disjointly
// supported traceless f1, f2 (resolvent chain R Ldot1 R Ldot2 R + swap).
double green_second_variation(const SpectralBasis& b, const TensorField2& f1,
                              const TensorField2& f2, const Point& x,
                              const Point& y);

// Double circle average of G at radius delta (x = y gives the regularized
// diagonal, which behaves like -ln delta + m at small delta).
double circle_averaged_green(const SpectralBasis& b, const Point& x,
                             const Point& y, double delta);

// Var[X_delta] on the homogeneous base metrics (x-independent)
double circle_variance(const SpectralBasis& b, double delta);

// --- band-limited field synthesis -----------------------------------------

struct FourierMode {
    int kx = 0, ky = 0;
    double amp_cos = 0.0, amp_sin = 0.0;
};
WeylFactor make_weyl_fourier(const Surface& s,
                             const std::vector<FourierMode>& modes);

struct SphMode {
    int l = 0, m = 0;  // m >= 0; amp_sin ignored for m = 0
    double amp_cos = 0.0, amp_sin = 0.0;
};
WeylFactor make_weyl_sphere(const Surface& s, const std::vector<SphMode>& modes);

// traceless torus tensor with f^{zz} = sum of complex Fourier modes
struct TensorMode {
    int kx = 0, ky = 0;
    cplx amp{};
};
TensorField2 make_tensor_fourier(const Surface& s,
                                 const std::vector<TensorMode>& modes,
                                 const std::vector<double>& trace = {});

// --- independent lattice oracle --------------------------------------------
// Q1 finite-element assembly of the Laplace-Beltrami operator on an n x n
// periodic lattice over [0,1)^2, solved by FFT-preconditioned conjugate
// gradients to residual 1e-10. Fully independent of the spectral path.

// inverse-metric components and volume factor at a point
struct MetricSample {
    double gxx = 1.0, gxy = 0.0, gyy = 1.0;
    double sqrtdet = 1.0;
};
using MetricEval = std::function<MetricSample(double x, double y)>;

MetricEval flat_metric();
// flat inverse metric perturbed by eps * f (f given analytically)
MetricEval perturbed_metric(
    const std::function<void(double, double, cplx&, double&)>& f_zz_and_trace,
    double eps);
// conformal metric e^omega |dz|^2
MetricEval conformal_metric(const std::function<double(double, double)>& omega);

class FdmGreenOracle {
  public:
    FdmGreenOracle(int n, const MetricEval& metric);

    // zero-mean Green value between lattice nodes
    double green(int jx1, int jy1, int jx2, int jy2) const;
    // full column G(., y) for the lattice node (jx, jy); row-major [iy][ix]
    const std::vector<double>& green_column(int jx, int jy) const;

    int n() const { return n_; }
    double volume() const { return vol_; }

  private:
    void apply(const std::vector<double>& u, std::vector<double>& out) const;
    std::vector<double> solve(std::vector<double> rhs) const;

    int n_ = 0;
    std::vector<std::array<double, 10>> elem_;  // per-cell sym 4x4 stiffness
    std::vector<double> mu_;                    // lumped node measure
    std::vector<double> flat_symbol_;           // FFT preconditioner symbol
    double vol_ = 0.0;
    mutable std::vector<double> col_;
    mutable long cache_key_ = -1;
};

}  // namespace llab::spectral
