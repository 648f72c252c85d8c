#include "llab/lcft.hpp"

#include <algorithm>
#include <cmath>

#include "llab/detail/legendre.hpp"
#include "llab/fft.hpp"
#include "llab/simd.hpp"

namespace llab::lcft {

using geometry::make_surface;

SeibergReport seiberg_check(const CorrelatorSpec& spec) {
    SeibergReport r;
    r.q = geometry::background_charge(spec.gamma);
    int chi = spec.surface == SurfaceKind::Sphere ? 2 : 0;
    r.threshold = r.q * chi;
    r.sum_alpha = 0.0;
    for (const auto& ins : spec.insertions) r.sum_alpha += ins.alpha;
    r.sum_ok = r.sum_alpha > r.threshold;
    r.ok = r.sum_ok;
    for (const auto& ins : spec.insertions) {
        bool ok = ins.alpha < r.q;
        r.insertion_ok.push_back(ok);
        r.ok = r.ok && ok;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Sampler construction

Sampler::Sampler(SurfaceKind kind, const McParams& p) : par_(p) {
    Surface s = make_surface(kind, p.grid_n);
    basis_ = std::make_shared<SpectralBasis>(SpectralBasis::build(s, p.cutoff));
    // spectral truncation is the field regularization here; params.delta only
    // sets the nominal delta^{...}-normalization scale of the regularized
    // exponentials (see the gmc module for circle-regularized measures)
    scale_.resize(basis_->num_modes());
    for (int n = 0; n < basis_->num_modes(); ++n)
        scale_[n] = std::sqrt(two_pi / basis_->lambda(n));
    var_delta_ = 0.0;
    {
        // truncation diagonal of the covariance, position independent on the
        // homogeneous base metrics
        Point o{0, cplx(0.25, 0.25)};
        if (kind == SurfaceKind::Sphere) o = Point{0, cplx(0.2, 0.0)};
        std::vector<double> e(basis_->num_modes());
        basis_->eval_all(o, e.data());
        for (int n = 0; n < basis_->num_modes(); ++n)
            var_delta_ += two_pi / basis_->lambda(n) * e[n] * e[n];
    }
    if (kind == SurfaceKind::Torus)
        build_torus();
    else
        build_sphere();
}

void Sampler::build_torus() {
    int n = par_.grid_n;
    if (2 * par_.cutoff >= n)
        throw ConfigError("sampler: torus grid must exceed twice the cutoff");
    mc_w_.assign(std::size_t(n) * n, 1.0 / (double(n) * n));
    const auto& modes = basis_->modes();
    pack_idx_pos_.resize(basis_->num_modes() / 2);
    pack_idx_neg_.resize(basis_->num_modes() / 2);
    for (int q = 0; q < basis_->num_modes(); q += 2) {
        int ii = (modes[q].b % n + n) % n, jj = (modes[q].a % n + n) % n;
        pack_idx_pos_[q / 2] = ii * n + jj;
        pack_idx_neg_[q / 2] = ((n - ii) % n) * n + (n - jj) % n;
    }
}

void Sampler::build_sphere() {
    int L = par_.cutoff;
    ntheta_ = par_.ring_theta > 0 ? par_.ring_theta : 2 * L + 16;
    nphi_ = par_.ring_phi;
    if (nphi_ <= 0) {
        nphi_ = 1;
        while (nphi_ < 4 * L || nphi_ < 64) nphi_ <<= 1;
    }
    if (!is_pow2(nphi_)) throw ConfigError("sampler: ring_phi must be a power of two");
    std::vector<double> gx, gw;
    detail::gauss_legendre(ntheta_, gx, gw);
    ring_t_ = gx;
    ring_wq_.resize(ntheta_);
    for (int r = 0; r < ntheta_; ++r) ring_wq_[r] = gw[r] * two_pi / nphi_;
    mc_w_.resize(std::size_t(ntheta_) * nphi_);
    for (int r = 0; r < ntheta_; ++r)
        for (int j = 0; j < nphi_; ++j)
            mc_w_[std::size_t(r) * nphi_ + j] = ring_wq_[r];

    // legendre tables per azimuthal order
    const auto& modes = basis_->modes();
    mblocks_.resize(L + 1);
    for (int m = 0; m <= L; ++m) mblocks_[m].m = m;
    for (int q = 0; q < basis_->num_modes(); ++q) {
        const auto& id = modes[q];
        auto& blk = mblocks_[id.b];
        if (id.b == 0) {
            blk.idx_cos.push_back(q);
        } else if (!id.is_sin) {
            blk.idx_cos.push_back(q);
        } else {
            blk.idx_sin.push_back(q);
        }
    }
    std::vector<double> pl((L + 1) * (L + 2) / 2);
    std::vector<std::vector<double>> plr(ntheta_);
    for (int r = 0; r < ntheta_; ++r) {
        detail::legendre_all(L, ring_t_[r], pl.data());
        plr[r] = pl;
    }
    const double inv_s2pi = 1.0 / std::sqrt(two_pi);
    const double inv_spi = 1.0 / std::sqrt(pi);
    for (int m = 0; m <= L; ++m) {
        auto& blk = mblocks_[m];
        int nl = int(blk.idx_cos.size());
        int l0 = m == 0 ? 1 : m;  // constant mode excluded
        blk.leg.resize(std::size_t(ntheta_) * nl);
        for (int r = 0; r < ntheta_; ++r)
            for (int li = 0; li < nl; ++li) {
                int l = l0 + li;
                double norm = m == 0 ? inv_s2pi : inv_spi;
                blk.leg[std::size_t(r) * nl + li] =
                    plr[r][l * (l + 1) / 2 + m] * norm;
            }
    }
}

Point Sampler::mc_point(std::size_t i) const {
    if (surface().kind() == SurfaceKind::Torus) {
        int n = par_.grid_n;
        int r = int(i) / n, c = int(i) % n;
        return {0, cplx(double(c) / n, double(r) / n)};
    }
    int r = int(i) / nphi_, j = int(i) % nphi_;
    double t = ring_t_[r];
    double rr = std::sqrt(std::max(0.0, (1.0 - t) / (1.0 + t)));
    double phi = two_pi * j / nphi_;
    return {0, std::polar(rr, phi)};
}

std::vector<double> Sampler::mc_synthesize(
    const std::vector<double>& coeff) const {
    if (surface().kind() == SurfaceKind::Torus) {
        // same layout as the basis grid
        return basis_->synthesize(coeff);
    }
    std::vector<double> out(mc_size(), 0.0);
    std::vector<cplx> spec(nphi_);
    std::vector<cplx> buf(nphi_);
    for (int r = 0; r < ntheta_; ++r) {
        std::fill(spec.begin(), spec.end(), cplx(0, 0));
        for (const auto& blk : mblocks_) {
            int nl = int(blk.idx_cos.size());
            if (nl == 0) continue;
            const double* leg = &blk.leg[std::size_t(r) * nl];
            double a = 0.0, b = 0.0;
            for (int li = 0; li < nl; ++li) {
                a += coeff[blk.idx_cos[li]] * leg[li];
                if (blk.m > 0) b += coeff[blk.idx_sin[li]] * leg[li];
            }
            if (blk.m == 0)
                spec[0] += a;
            else {
                cplx v = 0.5 * cplx(a, -b);
                spec[blk.m] += v;
                spec[nphi_ - blk.m] += std::conj(v);
            }
        }
        buf = spec;
        fft_inplace(buf.data(), nphi_, +1);
        for (int j = 0; j < nphi_; ++j)
            out[std::size_t(r) * nphi_ + j] = buf[j].real();
    }
    return out;
}

std::vector<double> Sampler::mc_project(const std::vector<double>& grid) const {
    if (surface().kind() == SurfaceKind::Torus) return basis_->project(grid);
    std::vector<double> coeff(num_modes(), 0.0);
    std::vector<cplx> buf(nphi_);
    for (int r = 0; r < ntheta_; ++r) {
        for (int j = 0; j < nphi_; ++j)
            buf[j] = grid[std::size_t(r) * nphi_ + j];
        fft_inplace(buf.data(), nphi_, -1);
        for (const auto& blk : mblocks_) {
            int nl = int(blk.idx_cos.size());
            if (nl == 0) continue;
            const double* leg = &blk.leg[std::size_t(r) * nl];
            double wc, ws = 0.0;
            if (blk.m == 0)
                wc = ring_wq_[r] * buf[0].real();
            else {
                wc = ring_wq_[r] * buf[blk.m].real();
                ws = -ring_wq_[r] * buf[blk.m].imag();
            }
            for (int li = 0; li < nl; ++li) {
                coeff[blk.idx_cos[li]] += wc * leg[li];
                if (blk.m > 0) coeff[blk.idx_sin[li]] += ws * leg[li];
            }
        }
    }
    return coeff;
}

std::vector<double> Sampler::cov_field(const Point& x) const {
    std::vector<double> evals(num_modes());
    basis_->eval_all(x, evals.data());
    std::vector<double> c(num_modes());
    for (int n = 0; n < num_modes(); ++n)
        c[n] = scale_[n] * scale_[n] * evals[n];
    return mc_synthesize(c);
}

double Sampler::cov(const Point& x, const Point& y) const {
    std::vector<double> ex(num_modes()), ey(num_modes());
    basis_->eval_all(x, ex.data());
    basis_->eval_all(y, ey.data());
    double acc = 0.0;
    for (int n = 0; n < num_modes(); ++n)
        acc += scale_[n] * scale_[n] * ex[n] * ey[n];
    return acc;
}

std::vector<double> Sampler::point_eval(const Point& x, bool) const {
    std::vector<double> v(num_modes());
    basis_->eval_all(x, v.data());
    for (int n = 0; n < num_modes(); ++n) v[n] *= scale_[n];
    return v;
}

std::vector<cplx> Sampler::point_eval_deriv(const Point& x, int order) const {
    std::vector<cplx> d1(num_modes()), d2(num_modes());
    basis_->eval_derivs(x, d1.data(), d2.data());
    auto& d = order == 1 ? d1 : d2;
    for (int n = 0; n < num_modes(); ++n)
        d[n] *= std::sqrt(two_pi / basis_->lambda(n));
    return d;
}

cplx Sampler::dfield_sq_expect(const Point& x) const {
    auto d1 = point_eval_deriv(x, 1);
    cplx acc(0, 0);
    for (int n = 0; n < num_modes(); ++n) acc += d1[n] * d1[n];
    return acc;
}

Sampler::Work Sampler::make_work() const {
    Work w;
    w.normals.resize(num_modes() + 1);
    w.field.resize(mc_size());
    w.dens.resize(mc_size());
    if (surface().kind() == SurfaceKind::Torus)
        w.fft_buf.resize(std::size_t(par_.grid_n) * par_.grid_n);
    else
        w.fft_buf.resize(nphi_);
    return w;
}

void Sampler::synthesize(std::uint64_t root_seed, std::uint64_t sample_index,
                         Work& w) const {
    PhiloxStream stream(root_seed, sample_index);
    int nm = num_modes();
    for (int n = 0; n < nm; n += 2) {
        double z0, z1;
        stream.normal_pair(n / 2, z0, z1);
        w.normals[n] = z0;
        w.normals[n + 1] = z1;
    }
    if (surface().kind() == SurfaceKind::Torus) {
        int n = par_.grid_n;
        std::fill(w.fft_buf.begin(), w.fft_buf.end(), cplx(0, 0));
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (int q = 0; q < nm; q += 2) {
            cplx a = cplx(scale_[q] * w.normals[q],
                          -scale_[q + 1] * w.normals[q + 1]) *
                     inv_sqrt2;
            w.fft_buf[pack_idx_pos_[q / 2]] += a;
            w.fft_buf[pack_idx_neg_[q / 2]] += std::conj(a);
        }
        fft2_inplace(w.fft_buf.data(), n, +1);
        for (std::size_t i = 0; i < w.field.size(); ++i)
            w.field[i] = w.fft_buf[i].real();
        return;
    }
    // sphere: per-ring Legendre contraction then azimuthal FFT
    std::vector<cplx>& spec = w.fft_buf;
    for (int r = 0; r < ntheta_; ++r) {
        std::fill(spec.begin(), spec.end(), cplx(0, 0));
        for (const auto& blk : mblocks_) {
            int nl = int(blk.idx_cos.size());
            if (nl == 0) continue;
            const double* leg = &blk.leg[std::size_t(r) * nl];
            double a = 0.0, b = 0.0;
            for (int li = 0; li < nl; ++li) {
                int qc = blk.idx_cos[li];
                a += scale_[qc] * w.normals[qc] * leg[li];
                if (blk.m > 0) {
                    int qs = blk.idx_sin[li];
                    b += scale_[qs] * w.normals[qs] * leg[li];
                }
            }
            if (blk.m == 0)
                spec[0] += a;
            else {
                cplx v = 0.5 * cplx(a, -b);
                spec[blk.m] += v;
                spec[nphi_ - blk.m] += std::conj(v);
            }
        }
        fft_inplace(spec.data(), nphi_, +1);
        for (int j = 0; j < nphi_; ++j)
            w.field[std::size_t(r) * nphi_ + j] = spec[j].real();
    }
}

// ---------------------------------------------------------------------------
// channels

namespace {

// mode-coefficient vector of a band-limited Weyl spec (constant excluded)
std::vector<double> weyl_coeffs(const SpectralBasis& b, const WeylSpec& ws) {
    std::vector<double> c(b.num_modes(), 0.0);
    const auto& modes = b.modes();
    if (b.surface().kind() == SurfaceKind::Torus) {
        for (const auto& fm : ws.fourier) {
            for (int q = 0; q < b.num_modes(); ++q) {
                const auto& id = modes[q];
                // basis pairs are the half-lattice; match k or -k
                if (id.a == fm.kx && id.b == fm.ky) {
                    // sqrt(2) cos/sin conventions: amp_cos*cos + amp_sin*sin
                    c[q] += (id.is_sin ? fm.amp_sin : fm.amp_cos) / std::sqrt(2.0);
                } else if (id.a == -fm.kx && id.b == -fm.ky) {
                    c[q] += (id.is_sin ? -fm.amp_sin : fm.amp_cos) / std::sqrt(2.0);
                }
            }
        }
    } else {
        for (const auto& sm : ws.sph)
            for (int q = 0; q < b.num_modes(); ++q) {
                const auto& id = modes[q];
                if (id.a == sm.l && id.b == sm.m)
                    c[q] += id.is_sin ? sm.amp_sin : sm.amp_cos;
            }
    }
    return c;
}

double weyl_constant(const WeylSpec& ws) {
    double c = 0.0;
    for (const auto& fm : ws.fourier)
        if (fm.kx == 0 && fm.ky == 0) c += fm.amp_cos;
    return c;
}

}  // namespace

Channel build_channel(const Sampler& smp, const CorrelatorSpec& spec,
                      const WeylSpec& weyl) {
    const auto& b = smp.basis();
    const Surface& surf = smp.surface();
    int chi = surf.euler_characteristic();
    double gamma = spec.gamma, mu = spec.mu;
    double Q = geometry::background_charge(gamma);
    if (!(mu > 0.0))
        throw DomainError("correlator: the potential requires mu > 0");
    auto sb = seiberg_check(spec);
    if (!sb.ok) throw DomainError("correlator: Seiberg bounds violated");
    double sum_alpha = sb.sum_alpha;
    double s = (sum_alpha - Q * chi) / gamma;
    double delta = smp.delta();

    std::size_t msz = smp.mc_size();
    int nm = smp.num_modes();

    // omega data (zero for the base metric)
    double wconst = weyl_constant(weyl);
    std::vector<double> wc = weyl_coeffs(b, weyl);
    bool flat_weyl = weyl.empty();
    std::vector<double> omega_grid(msz, wconst);
    if (!flat_weyl) {
        auto osc = smp.mc_synthesize(wc);
        for (std::size_t i = 0; i < msz; ++i) omega_grid[i] += osc[i];
    }
    std::vector<double> eomega(msz);
    for (std::size_t i = 0; i < msz; ++i) eomega[i] = std::exp(omega_grid[i]);

    const auto& w = smp.mc_weights();
    double vol_hat = simd::active().dot(w.data(), eomega.data(), msz);

    // After shifting the zero mode by the e^omega-mean of the field, every
    // insertion and chaos functional is a plain (stenciled) evaluation of the
    // base field; the only omega-specific Gaussian coupling left is the
    // curvature pairing (X, h_c) with h_c = -(Q/4 pi)(K_g - Lap omega), whose
    // covariance field is psi_c = -(Q/2) omega (mean-free part, exact at the
    // truncation since omega is band limited).
    std::vector<double> psic_c(nm);
    for (int n = 0; n < nm; ++n) psic_c[n] = -(Q / 2.0) * wc[n];
    std::vector<double> psic_d;
    double var_xhc = 0.0;
    if (!flat_weyl) {
        psic_d = smp.mc_synthesize(psic_c);
        for (int n = 0; n < nm; ++n) {
            // Var[(X,h_c)] with <e_n, h_c> = -(Q/4pi) lambda_n omega_n
            double hn = -(Q / (4.0 * pi)) * b.lambda(n) * wc[n];
            var_xhc += two_pi / b.lambda(n) * hn * hn;
        }
    }
    (void)vol_hat;

    // point evaluations at the insertions
    std::vector<std::vector<double>> evals;
    for (const auto& ins : spec.insertions) {
        std::vector<double> e(nm);
        b.eval_all(surf.canonical(ins.x), e.data());
        evals.push_back(std::move(e));
    }
    auto dot_coeff = [&](const std::vector<double>& c, int j) {
        double acc = 0.0;
        for (int n = 0; n < nm; ++n) acc += c[n] * evals[j][n];
        return acc;
    };

    int nins = int(spec.insertions.size());
    std::vector<double> psic_at(nins, 0.0), omega_at(nins, wconst);
    for (int j = 0; j < nins; ++j) {
        if (!flat_weyl) {
            psic_at[j] = dot_coeff(psic_c, j);
            omega_at[j] += dot_coeff(wc, j);
        }
    }
    // pairwise stencil covariances
    auto cov_pts = [&](int i, int j) {
        double acc = 0.0;
        for (int n = 0; n < nm; ++n)
            acc += two_pi / b.lambda(n) * evals[i][n] * evals[j][n];
        return acc;
    };

    // chaos weights
    Channel ch;
    ch.gamma = gamma;
    ch.s = s;
    ch.wtilde.resize(msz);
    std::vector<std::vector<double>> tilt_fields;
    for (int j = 0; j < nins; ++j)
        tilt_fields.push_back(smp.cov_field(surf.canonical(spec.insertions[j].x)));
    double lgd = 0.5 * gamma * gamma * std::log(delta);
    for (std::size_t i = 0; i < msz; ++i) {
        double t = 0.0;
        for (int j = 0; j < nins; ++j)
            t += spec.insertions[j].alpha * tilt_fields[j][i];
        if (!flat_weyl) t += psic_d[i];
        double lw = std::log(w[i]) + omega_grid[i] + lgd +
                    0.25 * gamma * gamma * omega_grid[i] + gamma * t;
        ch.wtilde[i] = std::exp(lw);
    }
    ch.mass_det = llab::pairwise_sum(ch.wtilde);
    ch.log_mass_det = std::log(ch.mass_det);

    // deterministic log prefactor
    double det = std::lgamma(s) - std::log(gamma) - s * std::log(mu);
    for (int i = 0; i < nins; ++i)
        for (int j = i + 1; j < nins; ++j)
            det += spec.insertions[i].alpha * spec.insertions[j].alpha *
                   cov_pts(i, j);
    for (int j = 0; j < nins; ++j) {
        // net insertion normalization: (a^2/2)(m_hat_g + omega/2)
        double m_hat_j = cov_pts(j, j) + std::log(delta) + 0.5 * omega_at[j];
        double a = spec.insertions[j].alpha;
        det += 0.5 * a * a * m_hat_j;
        if (!flat_weyl) det += a * psic_at[j];
    }
    det += 0.5 * var_xhc;
    det -= s * ch.log_mass_det;
    ch.det_log = det;
    return ch;
}

double channel_mass(const Channel& ch, const Sampler&, Sampler::Work& w) {
    return simd::active().dot(ch.wtilde.data(), w.dens.data(), w.dens.size());
}

namespace {
void exp_field(double gamma, Sampler::Work& w) {
    for (std::size_t i = 0; i < w.field.size(); ++i)
        w.field[i] *= gamma;
    simd::active().exp_v(w.field.data(), w.dens.data(), w.field.size());
}

void validate_geometry(const Sampler& smp, const CorrelatorSpec& spec) {
    const Surface& s = smp.surface();
    double min_dist = 4.0 * (s.kind() == SurfaceKind::Torus
                                 ? 1.0 / smp.params().grid_n
                                 : pi / (2.0 * smp.params().cutoff));
    for (std::size_t i = 0; i < spec.insertions.size(); ++i) {
        const Point& x = spec.insertions[i].x;
        if (s.kind() == SurfaceKind::Sphere && std::abs(x.z) > 10.0)
            throw ConfigError("insertion outside the chart guard |z| <= 10");
        for (std::size_t j = i + 1; j < spec.insertions.size(); ++j)
            if (s.distance(s.canonical(x),
                           s.canonical(spec.insertions[j].x)) < min_dist)
                throw ConfigError("insertions closer than 4 grid spacings");
    }
}
}  // namespace

namespace {
CorrelatorSpec canonical_spec(CorrelatorSpec spec) {
    std::sort(spec.insertions.begin(), spec.insertions.end(),
              [](const Insertion& a, const Insertion& b) {
                  if (a.x.chart != b.x.chart) return a.x.chart < b.x.chart;
                  if (a.x.z.real() != b.x.z.real())
                      return a.x.z.real() < b.x.z.real();
                  if (a.x.z.imag() != b.x.z.imag())
                      return a.x.z.imag() < b.x.z.imag();
                  return a.alpha < b.alpha;
              });
    return spec;
}
}  // namespace

CorrelatorEstimate correlator_mc(const CorrelatorSpec& spec_in,
                                 const McParams& params) {
    CorrelatorSpec spec = canonical_spec(spec_in);
    Sampler smp(spec.surface, params);
    validate_geometry(smp, spec);
    Channel ch = build_channel(smp, spec, WeylSpec{});
    auto stats = mc::run_mc(
        params.samples, 2, params.workers,
        [&](std::uint64_t idx, double* obs) {
            thread_local Sampler::Work w;
            if (w.field.size() != smp.mc_size() ||
                w.normals.size() != std::size_t(smp.num_modes()) + 1)
                w = smp.make_work();
            smp.synthesize(params.seed, idx, w);
            exp_field(ch.gamma, w);
            double m = channel_mass(ch, smp, w);
            double val = std::exp(-ch.s * (std::log(m) - ch.log_mass_det));
            obs[0] = val;
            obs[1] = val * val;
        });
    auto jk = stats.jackknife(
        [](const std::vector<double>& m) { return std::log(m[0]); });
    CorrelatorEstimate est;
    est.det_log = ch.det_log;
    est.mc_log = jk.value;
    est.log_estimate = ch.det_log + jk.value;
    est.stderr_ = jk.stderr_;
    est.s_exponent = ch.s;
    est.samples = stats.total_samples();
    est.seed = params.seed;
    auto m = stats.mean();
    double rel_var = m[1] / (m[0] * m[0]) - 1.0;
    est.tail_flag = rel_var > double(est.samples) / 10.0;
    if (!std::isfinite(est.log_estimate))
        throw ComputeError("correlator_mc: non-finite estimate (alpha too close to Q?)");
    return est;
}

KpzReport kpz_check(const CorrelatorSpec& spec_in, const McParams& params,
                    bool decoupled) {
    CorrelatorSpec spec = canonical_spec(spec_in);
    Sampler smp(spec.surface, params);
    validate_geometry(smp, spec);
    Channel ch = build_channel(smp, spec, WeylSpec{});
    int chi = smp.surface().euler_characteristic();
    double Q = geometry::background_charge(spec.gamma);
    double sum_alpha = 0.0;
    for (const auto& ins : spec.insertions) sum_alpha += ins.alpha;
    double pred = (sum_alpha - chi * Q) / (spec.mu * spec.gamma);

    KpzReport rep;
    rep.decoupled = decoupled;
    rep.predicted_scalar = pred;

    if (!decoupled) {
        // shared samples; lhs integrates the gamma-insertion over the grid,
        // which reproduces the tilted mass cell sum
        auto stats = mc::run_mc(
            params.samples, 2, params.workers,
            [&](std::uint64_t idx, double* obs) {
                thread_local Sampler::Work w;
                if (w.field.size() != smp.mc_size() ||
                    w.normals.size() != std::size_t(smp.num_modes()) + 1)
                    w = smp.make_work();
                smp.synthesize(params.seed, idx, w);
                exp_field(ch.gamma, w);
                double m = channel_mass(ch, smp, w);
                double lm = std::log(m) - ch.log_mass_det;
                obs[0] = std::exp(-ch.s * lm);                 // rhs weight
                obs[1] = std::exp(-(ch.s + 1.0) * lm) * (m / ch.mass_det);
            });
        auto jk = stats.jackknife([](const std::vector<double>& m) {
            return m[1] / m[0];
        });
        rep.ratio = jk.value;  // lhs/(pred*rhs) after all prefactors cancel
        rep.ratio_stderr = jk.stderr_;
        rep.samples = stats.total_samples();
        rep.rhs_log = ch.det_log + std::log(stats.mean()[0]);
        rep.lhs_log = rep.rhs_log + std::log(pred) + std::log(jk.value);
        return rep;
    }

    // decoupled: raw unshifted Wick estimator on the lhs
    Channel plain = ch;  // plain chaos weights: no insertion tilts
    {
        const auto& w = smp.mc_weights();
        double lgd = 0.5 * spec.gamma * spec.gamma * std::log(smp.delta());
        for (std::size_t i = 0; i < plain.wtilde.size(); ++i)
            plain.wtilde[i] = w[i] * std::exp(lgd);
        plain.mass_det = llab::pairwise_sum(plain.wtilde);
        plain.log_mass_det = std::log(plain.mass_det);
    }
    int nins = int(spec.insertions.size());
    std::vector<std::vector<double>> ev;  // stencil eval vectors
    for (const auto& ins : spec.insertions)
        ev.push_back(smp.point_eval(smp.surface().canonical(ins.x), true));
    double var = smp.var_delta();
    double mh = smp.m_hat();
    // deterministic prefactor of the raw estimator:
    //   lgamma(s+1) - ln gamma - (s+1) ln mu + sum_j (a^2/2) m_hat
    double sum_wick_norm = 0.0;
    for (const auto& ins : spec.insertions)
        sum_wick_norm += 0.5 * ins.alpha * ins.alpha * mh;
    double det_raw = std::lgamma(ch.s + 1.0) - std::log(spec.gamma) -
                     (ch.s + 1.0) * std::log(spec.mu) + sum_wick_norm -
                     ch.s * plain.log_mass_det;

    auto stats = mc::run_mc(
        params.samples, 2, params.workers,
        [&](std::uint64_t idx, double* obs) {
            thread_local Sampler::Work w;
            if (w.field.size() != smp.mc_size() ||
                w.normals.size() != std::size_t(smp.num_modes()) + 1)
                w = smp.make_work();
            smp.synthesize(params.seed, idx, w);
            // wick factors need the raw normals before exp_field scales field
            double wick = 0.0;
            for (int j = 0; j < nins; ++j) {
                double xv = simd::active().dot(ev[j].data(), w.normals.data(),
                                               ev[j].size());
                double a = spec.insertions[j].alpha;
                wick += a * xv - 0.5 * a * a * var;
            }
            exp_field(ch.gamma, w);
            double m_sh = channel_mass(ch, smp, w);
            double m_pl = channel_mass(plain, smp, w);
            obs[0] = std::exp(-ch.s * (std::log(m_sh) - ch.log_mass_det));
            obs[1] = std::exp(wick - ch.s * (std::log(m_pl) - plain.log_mass_det));
        });
    rep.samples = stats.total_samples();
    rep.rhs_log = std::log(pred) + ch.det_log + std::log(stats.mean()[0]);
    rep.lhs_log = det_raw + std::log(stats.mean()[1]);
    double c_l = det_raw, c_r = std::log(pred) + ch.det_log;
    auto jk = stats.jackknife([=](const std::vector<double>& m) {
        return std::exp(c_l + std::log(m[1]) - c_r - std::log(m[0]));
    });
    rep.ratio = jk.value;
    rep.ratio_stderr = jk.stderr_;
    return rep;
}

WeylReport weyl_covariance_check(const CorrelatorSpec& spec_in,
                                 const WeylSpec& weyl, const McParams& params,
                                 bool decoupled) {
    CorrelatorSpec spec = canonical_spec(spec_in);
    Sampler smp(spec.surface, params);
    validate_geometry(smp, spec);
    Channel base = build_channel(smp, spec, WeylSpec{});
    Channel hat = build_channel(smp, spec, weyl);

    std::uint64_t seed_hat =
        decoupled ? params.seed ^ 0x9e3779b97f4a7c15ULL : params.seed;
    auto stats = mc::run_mc(
        params.samples, 2, params.workers,
        [&](std::uint64_t idx, double* obs) {
            thread_local Sampler::Work w;
            if (w.field.size() != smp.mc_size() ||
                w.normals.size() != std::size_t(smp.num_modes()) + 1)
                w = smp.make_work();
            smp.synthesize(params.seed, idx, w);
            exp_field(base.gamma, w);
            double mb = channel_mass(base, smp, w);
            obs[0] = std::exp(-base.s * (std::log(mb) - base.log_mass_det));
            if (seed_hat != params.seed) {
                smp.synthesize(seed_hat, idx, w);
                exp_field(hat.gamma, w);
            }
            double mh = channel_mass(hat, smp, w);
            obs[1] = std::exp(-hat.s * (std::log(mh) - hat.log_mass_det));
        });
    WeylReport rep;
    rep.samples = stats.total_samples();
    auto jk = stats.jackknife([&](const std::vector<double>& m) {
        return (hat.det_log + std::log(m[1])) - (base.det_log + std::log(m[0]));
    });
    rep.measured = jk.value;
    rep.stderr_ = jk.stderr_;
    rep.base_log = base.det_log + std::log(stats.mean()[0]);
    rep.hat_log = hat.det_log + std::log(stats.mean()[1]);

    // predicted: 6 Q^2 A(omega, g) - sum Delta_alpha omega(x_j)
    const Surface& surf = smp.surface();
    geometry::WeylFactor wf =
        spec.surface == SurfaceKind::Torus
            ? spectral::make_weyl_fourier(surf, weyl.fourier)
            : spectral::make_weyl_sphere(surf, weyl.sph);
    double wconst = weyl_constant(weyl);
    for (auto& v : wf.omega) v += wconst;
    rep.anomaly_a = geometry::anomaly_functional(wf, surf);
    double Q = geometry::background_charge(spec.gamma);
    double pred = 6.0 * Q * Q * rep.anomaly_a;
    for (const auto& ins : spec.insertions) {
        double om = wconst;
        std::vector<double> c = weyl_coeffs(smp.basis(), weyl);
        std::vector<double> e(smp.num_modes());
        smp.basis().eval_all(surf.canonical(ins.x), e.data());
        for (int n = 0; n < smp.num_modes(); ++n) om += c[n] * e[n];
        pred -= geometry::conformal_weight(ins.alpha, spec.gamma) * om;
    }
    rep.predicted = pred;
    return rep;
}

MobiusMap MobiusMap::rotation(double theta) {
    // rotation about the y-axis by theta: z -> (cos t/2 z - sin t/2)/(sin t/2 z + cos t/2)
    double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0)};
}

MobiusMap MobiusMap::dilation(double lambda) {
    double r = std::sqrt(lambda);
    return {cplx(r, 0), cplx(0, 0), cplx(0, 0), cplx(1.0 / r, 0)};
}

double mobius_omega(const MobiusMap& m, cplx z) {
    cplx psi = m.apply(z);
    cplx dpsi = m.dz(z);
    return std::log(std::norm(dpsi)) + 2.0 * std::log1p(std::norm(z)) -
           2.0 * std::log1p(std::norm(psi));
}

MobiusReport mobius_covariance_check(const CorrelatorSpec& spec,
                                     const MobiusMap& map,
                                     const McParams& params) {
    if (spec.surface != SurfaceKind::Sphere)
        throw ConfigError("mobius_covariance_check: sphere only");
    CorrelatorSpec moved = spec;
    for (auto& ins : moved.insertions) {
        if (ins.x.chart != 0)
            throw ConfigError("mobius: insertions must live in the primary chart");
        ins.x.z = map.apply(ins.x.z);
        if (std::abs(ins.x.z) > 10.0)
            throw ConfigError("mobius: mapped insertion leaves the chart guard");
    }
    McParams pa = params;
    McParams pb = params;
    pb.seed = params.seed ^ 0x9e3779b97f4a7c15ULL;
    auto ea = correlator_mc(moved, pa);
    auto eb = correlator_mc(spec, pb);

    MobiusReport rep;
    rep.samples = ea.samples + eb.samples;
    rep.measured = ea.log_estimate - eb.log_estimate;
    rep.stderr_ = std::hypot(ea.stderr_, eb.stderr_);

    // omega_psi with analytic chart gradient for the anomaly quadrature
    const Surface surf = make_surface(SurfaceKind::Sphere, 64);
    geometry::WeylFactor wf;
    wf.omega.resize(surf.grid_size());
    wf.grad_z = std::vector<cplx>(surf.grid_size());
    wf.band = 0;
    for (std::size_t i = 0; i < surf.grid_size(); ++i) {
        geometry::Point p = surf.point(i);
        cplx z = p.chart == 0 ? p.z : (std::abs(p.z) < 1e-14 ? 1e14 : 1.0 / p.z);
        // chart-1 coordinate w: omega as a function on the sphere is the same
        // value; gradient in the local chart via the chain rule
        wf.omega[i] = mobius_omega(map, z);
        cplx psi = map.apply(z), dpsi = map.dz(z);
        cplx ddpsi = -2.0 * map.c / std::pow(map.c * z + map.d, 3);
        cplx grad = ddpsi / dpsi + 2.0 * std::conj(z) / (1.0 + std::norm(z)) -
                    2.0 * std::conj(psi) * dpsi / (1.0 + std::norm(psi));
        if (p.chart == 1) grad *= -z * z;  // dz/dw with z = 1/w
        (*wf.grad_z)[i] = grad;
    }
    rep.anomaly_a = geometry::anomaly_functional(wf, surf);
    double Q = geometry::background_charge(spec.gamma);
    double pred = 6.0 * Q * Q * rep.anomaly_a;
    for (const auto& ins : spec.insertions)
        pred -= geometry::conformal_weight(ins.alpha, spec.gamma) *
                mobius_omega(map, ins.x.z);
    rep.predicted = pred;
    return rep;
}

}  // namespace llab::lcft
