#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "llab/gff.hpp"
#include "llab/mc.hpp"
#include "llab/spectral.hpp"

namespace llab::lcft {

using geometry::Point;
using geometry::Surface;
using geometry::SurfaceKind;
using geometry::WeylFactor;
using spectral::SpectralBasis;

struct Insertion {
    Point x;
    double alpha = 0.0;
};

struct CorrelatorSpec {
    SurfaceKind surface = SurfaceKind::Torus;
    std::vector<Insertion> insertions;
    double gamma = 1.0;
    double mu = 1.0;
};

struct SeibergReport {
    bool ok = false;
    double q = 0.0;
    double sum_alpha = 0.0;
    double threshold = 0.0;  // Q * chi
    bool sum_ok = false;
    std::vector<bool> insertion_ok;
};
SeibergReport seiberg_check(const CorrelatorSpec& spec);

// band-limited Weyl factor given by modes (torus Fourier / sphere harmonics)
struct WeylSpec {
    std::vector<spectral::FourierMode> fourier;
    std::vector<spectral::SphMode> sph;
    bool empty() const { return fourier.empty() && sph.empty(); }
};

struct McParams {
    int grid_n = 128;  // torus MC grid (power of two)
    int cutoff = 48;
    double delta = 1.0 / 12;
    std::uint64_t samples = 10000;
    std::uint64_t seed = 1;
    int workers = 0;
    int ring_theta = 0;  // sphere ring grid (0: derived from cutoff)
    int ring_phi = 0;
};

struct CorrelatorEstimate {
    double log_estimate = 0.0;
    double stderr_ = 0.0;
    double det_log = 0.0;
    double mc_log = 0.0;
    double s_exponent = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    bool tail_flag = false;
};

// ---------------------------------------------------------------------------
// Shared sampling machinery: spectral synthesis of the delta-averaged field
// on the Monte Carlo grid (surface grid on the torus, Gauss-Legendre ring
// grid on the sphere), plus the Girsanov-shifted estimator channels.

class Sampler {
  public:
    Sampler(SurfaceKind kind, const McParams& p);

    const SpectralBasis& basis() const { return *basis_; }
    const Surface& surface() const { return basis_->surface(); }
    const McParams& params() const { return par_; }
    double delta() const { return par_.delta; }
    int num_modes() const { return basis_->num_modes(); }

    // MC grid
    std::size_t mc_size() const { return mc_w_.size(); }
    const std::vector<double>& mc_weights() const { return mc_w_; }
    Point mc_point(std::size_t i) const;

    // deterministic synthesis / projection on the MC grid
    std::vector<double> mc_synthesize(const std::vector<double>& coeff) const;
    std::vector<double> mc_project(const std::vector<double>& grid) const;

    // coefficient-space helpers
    double var_delta() const { return var_delta_; }
    double m_hat() const { return var_delta_ + std::log(par_.delta); }
    // double-stencil covariance field C(x, .) on the MC grid
    std::vector<double> cov_field(const Point& x) const;
    // double-stencil covariance between two points
    double cov(const Point& x, const Point& y) const;

    // eval vector v with sample value = dot(v, normals); stencil applies the
    // delta-circle multiplier, derivs select d/dz or d^2/dz^2 of the field
    std::vector<double> point_eval(const Point& x, bool stencil) const;
    std::vector<cplx> point_eval_deriv(const Point& x, int order) const;
    // E[(dX)^2](x) at the working truncation (complex square)
    cplx dfield_sq_expect(const Point& x) const;

    // per-sample workspace
    struct Work {
        std::vector<double> normals;
        std::vector<cplx> fft_buf;
        std::vector<double> ring_a, ring_b;
        std::vector<double> field;  // X_delta on the MC grid
        std::vector<double> dens;   // scratch for chaos densities
    };
    Work make_work() const;
    // draw normals for sample index and synthesize X_delta onto w.field
    void synthesize(std::uint64_t root_seed, std::uint64_t sample_index,
                    Work& w) const;

  private:
    McParams par_;
    std::shared_ptr<SpectralBasis> basis_;
    std::vector<double> mc_w_;
    std::vector<double> scale_;  // sqrt(2 pi / lambda) * stencil multiplier
    double var_delta_ = 0.0;
    // torus packing
    std::vector<int> pack_idx_pos_, pack_idx_neg_;
    // sphere ring tables
    int ntheta_ = 0, nphi_ = 0;
    std::vector<double> ring_t_, ring_wq_;
    struct MBlock {
        int m;
        std::vector<int> idx_cos, idx_sin;      // basis indices per l
        std::vector<double> leg;                // [ring][l] packed
    };
    std::vector<MBlock> mblocks_;
    void build_torus();
    void build_sphere();
};

// One Girsanov-shifted estimator: fully precomputed tilted chaos weights plus
// the deterministic log prefactor. The per-sample weight is
// (M / mass_det)^{-s} with M = sum_i wtilde_i exp(gamma X_delta(y_i)).
struct Channel {
    std::vector<double> wtilde;
    double det_log = 0.0;   // includes -s ln(mass_det) and lgamma(s) etc.
    double s = 0.0;
    double gamma = 0.0;
    double mass_det = 0.0;
    double log_mass_det = 0.0;
};

// Build the estimator channel for a (possibly Weyl-transformed) metric
// e^omega g; pass an empty WeylSpec for the base metric. All curvature
// couplings are carried exactly (they vanish identically on the base
// metrics, which a test asserts).
Channel build_channel(const Sampler& smp, const CorrelatorSpec& spec,
                      const WeylSpec& weyl);

// per-sample tilted mass of a channel
double channel_mass(const Channel& ch, const Sampler& smp, Sampler::Work& w);

// ---------------------------------------------------------------------------
// operations

CorrelatorEstimate correlator_mc(const CorrelatorSpec& spec,
                                 const McParams& params);

struct KpzReport {
    double ratio = 0.0;          // LHS / (predicted scalar * RHS)
    double ratio_stderr = 0.0;
    double predicted_scalar = 0.0;
    double lhs_log = 0.0;
    double rhs_log = 0.0;
    bool decoupled = false;
    std::uint64_t samples = 0;
};
// coupled (default): both sides share the per-sample tilted chaos, making the
// identity exact up to rounding at matched regularization; decoupled: the
// left side uses the raw unshifted Wick estimator so the comparison carries
// real statistical error (validating the Girsanov shift on the way).
KpzReport kpz_check(const CorrelatorSpec& spec, const McParams& params,
                    bool decoupled = false);

struct WeylReport {
    double measured = 0.0;
    double stderr_ = 0.0;
    double predicted = 0.0;
    double anomaly_a = 0.0;  // A(omega, g) by quadrature
    double base_log = 0.0, hat_log = 0.0;
    std::uint64_t samples = 0;
};
// coupled (default): both channels share every sample, and with the
// truncation regularization the identity holds exactly per sample, so the
// report is a machine-precision algebra check against the independently
// quadratured anomaly functional. decoupled: the two sides run on disjoint
// seed streams and the comparison carries genuine statistical error.
WeylReport weyl_covariance_check(const CorrelatorSpec& spec,
                                 const WeylSpec& weyl, const McParams& params,
                                 bool decoupled = false);

struct MobiusMap {
    cplx a{1, 0}, b{0, 0}, c{0, 0}, d{1, 0};  // normalized ad - bc = 1
    cplx apply(cplx z) const { return (a * z + b) / (c * z + d); }
    cplx dz(cplx z) const {
        cplx q = c * z + d;
        return 1.0 / (q * q);
    }
    static MobiusMap rotation(double theta);
    static MobiusMap dilation(double lambda);
};
// omega_psi = ln(|psi'|^2 (1+|z|^2)^2 / (1+|psi z|^2)^2)
double mobius_omega(const MobiusMap& m, cplx z);

struct MobiusReport {
    double measured = 0.0;  // log E(psi x) - log E(x)
    double stderr_ = 0.0;
    double predicted = 0.0;
    double anomaly_a = 0.0;  // quadrature of A(omega_psi, g); 0 analytically
    std::uint64_t samples = 0;
};
MobiusReport mobius_covariance_check(const CorrelatorSpec& spec,
                                     const MobiusMap& map,
                                     const McParams& params);

}  // namespace llab::lcft
