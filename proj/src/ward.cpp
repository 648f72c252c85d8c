#include "llab/ward.hpp"

#include <algorithm>
#include <cmath>

#include "llab/fft.hpp"
#include "llab/simd.hpp"

namespace llab::ward {

using lcft::build_channel;
using lcft::Channel;
using lcft::WeylSpec;

// --- Cauchy transforms -------------------------------------------------------

std::vector<cplx> cauchy_transform_plane(const std::vector<cplx>& f, int n,
                                         double box) {
    if (!is_pow2(n)) throw ConfigError("cauchy: grid must be a power of two");
    int m = 2 * n;  // zero padding doubles the box, removing wrap-around
    double h = box / n;
    std::vector<cplx> F(std::size_t(m) * m, cplx(0, 0)),
        K(std::size_t(m) * m, cplx(0, 0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            F[std::size_t(i) * m + j] = f[std::size_t(i) * n + j] * h * h;
    // kernel samples 1/(pi z) at displacements; the self cell integrates to
    // zero by symmetry
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            int dy = i < m / 2 ? i : i - m;
            int dx = j < m / 2 ? j : j - m;
            if (dx == 0 && dy == 0) continue;
            cplx z(dx * h, dy * h);
            K[std::size_t(i) * m + j] = 1.0 / (pi * z);
        }
    fft2_inplace(F.data(), m, -1);
    fft2_inplace(K.data(), m, -1);
    for (std::size_t i = 0; i < F.size(); ++i) F[i] *= K[i];
    ifft2_normalized(F.data(), m);
    std::vector<cplx> out(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out[std::size_t(i) * n + j] = F[std::size_t(i) * m + j];
    return out;
}

TorusCauchyResult cauchy_transform_torus(const std::vector<cplx>& f, int n,
                                         bool project_mean) {
    if (!is_pow2(n)) throw ConfigError("cauchy: grid must be a power of two");
    TorusCauchyResult res;
    cplx mean(0, 0);
    for (const auto& v : f) mean += v;
    mean /= double(f.size());
    if (std::abs(mean) > 1e-12 && !project_mean)
        throw DomainError(
            "cauchy_transform_torus: input has a nonzero mean; pass "
            "project_mean to remove and report it");
    res.removed_mean = mean;
    std::vector<cplx> spec(f.begin(), f.end());
    fft2_inplace(spec.data(), n, -1);
    double norm = 1.0 / (double(n) * n);
    for (int i = 0; i < n; ++i) {
        int ky = fft_freq(i, n);
        for (int j = 0; j < n; ++j) {
            int kx = fft_freq(j, n);
            // d/dzbar of e^{2 pi i k.x} is pi i (kx + i ky); invert it
            cplx kc(kx, ky);
            cplx mult = (kx == 0 && ky == 0)
                            ? cplx(0, 0)
                            : 1.0 / (cplx(0, pi) * kc);
            if (i == n / 2 || j == n / 2) mult = 0.0;
            spec[std::size_t(i) * n + j] *= mult * norm;
        }
    }
    fft2_inplace(spec.data(), n, +1);
    res.u = std::move(spec);
    return res;
}

DeltaKernels delta_perturbation_kernels(const Surface& s, const Point& z,
                                        const std::vector<cplx>& dsigma_grid) {
    DeltaKernels out;
    std::size_t sz = s.grid_size();
    out.psi_dot.resize(sz);
    out.omega_dot.resize(sz);
    double worst = 0.0;
    for (std::size_t i = 0; i < sz; ++i) {
        Point p = s.point(i);
        cplx w = p.z;
        if (p.chart != z.chart) {
            // transition into z's chart; skip the far pole
            if (std::abs(w) < 1e-12) {
                out.psi_dot[i] = out.omega_dot[i] = 0.0;
                continue;
            }
            w = 1.0 / w;
        }
        cplx d = w - z.z;
        if (std::abs(d) < 1e-12) {
            out.psi_dot[i] = out.omega_dot[i] = 0.0;
            continue;
        }
        cplx dsig = dsigma_grid.empty() ? cplx(0, 0) : dsigma_grid[i];
        if (dsigma_grid.empty() && s.kind() == SurfaceKind::Sphere)
            dsig = -2.0 * std::conj(w) / (1.0 + std::norm(w));
        out.psi_dot[i] = -1.0 / (4.0 * pi * d);
        out.omega_dot[i] = (1.0 / (4.0 * pi)) * (1.0 / (d * d) + dsig / d);
        // consistency: omega_dot = (d/dw - d sigma) psi_dot
        cplx dpsi = 1.0 / (4.0 * pi * d * d);
        cplx combo = dpsi - dsig * out.psi_dot[i];
        worst = std::max(worst, std::abs(combo - out.omega_dot[i]));
    }
    out.consistency_residual = worst;
    return out;
}

BeltramiResult beltrami_solve_linear(const std::vector<cplx>& mu, int n,
                                     int order) {
    if (!is_pow2(n)) throw ConfigError("beltrami: grid must be a power of two");
    double norm_inf = 0.0;
    for (const auto& v : mu) norm_inf = std::max(norm_inf, std::abs(v));
    if (norm_inf > 0.2)
        throw ComputeError(
            "beltrami_solve_linear: ||mu||_inf > 0.2, Neumann series unsafe");
    std::size_t sz = mu.size();
    auto beurling = [&](const std::vector<cplx>& g) {
        std::vector<cplx> spec(g);
        fft2_inplace(spec.data(), n, -1);
        double nm = 1.0 / (double(n) * n);
        for (int i = 0; i < n; ++i) {
            int ky = fft_freq(i, n);
            for (int j = 0; j < n; ++j) {
                int kx = fft_freq(j, n);
                cplx kc(kx, ky), kb(kx, -ky);
                cplx mult = (kx == 0 && ky == 0) ? cplx(0, 0) : kb / kc;
                if (i == n / 2 || j == n / 2) mult = 0.0;
                spec[std::size_t(i) * n + j] *= mult * nm;
            }
        }
        fft2_inplace(spec.data(), n, +1);
        return spec;
    };
    BeltramiResult res;
    res.order = order;
    std::vector<cplx> h(mu), bh;
    for (int it = 0; it < order; ++it) {
        bh = beurling(h);
        double r = 0.0;
        std::vector<cplx> hn(sz);
        for (std::size_t i = 0; i < sz; ++i) {
            hn[i] = mu[i] * (1.0 + bh[i]);
            r = std::max(r, std::abs(hn[i] - h[i]));
        }
        h = std::move(hn);
        res.residual_by_order.push_back(r);
    }
    bh = beurling(h);
    res.residual = 0.0;
    for (std::size_t i = 0; i < sz; ++i)
        res.residual = std::max(res.residual,
                                std::abs(h[i] - mu[i] * (1.0 + bh[i])));
    // psi = id + C h: spectral inverse on the mean-free part plus the
    // mean * zbar particular solution
    cplx hmean(0, 0);
    for (const auto& v : h) hmean += v;
    hmean /= double(sz);
    auto ch = cauchy_transform_torus(h, n, true).u;
    res.psi.resize(sz);
    res.dpsi.resize(sz);
    res.dbar_psi = h;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::size_t idx = std::size_t(i) * n + j;
            cplx zz(double(j) / n, double(i) / n);
            res.psi[idx] = zz + ch[idx] + hmean * std::conj(zz);
            res.dpsi[idx] = 1.0 + bh[idx];
        }
    return res;
}

KillingResult killing_inverse(const Surface& s, const TensorField2& f) {
    if (s.kind() != SurfaceKind::Torus)
        throw ConfigError("killing_inverse: flat torus only");
    int n = s.n();
    KillingResult res;
    std::vector<cplx> spec(f.f_zz_up);
    fft2_inplace(spec.data(), n, -1);
    double nm = 1.0 / (double(n) * n);
    res.moduli_mode = spec[0] * nm;
    for (int i = 0; i < n; ++i) {
        int ky = fft_freq(i, n);
        for (int j = 0; j < n; ++j) {
            int kx = fft_freq(j, n);
            cplx kc(kx, ky);
            // 2 grad^z u^z = 4 d/dzbar u^z = -(f - f_m)
            cplx mult = (kx == 0 && ky == 0)
                            ? cplx(0, 0)
                            : -1.0 / (4.0 * cplx(0, pi) * kc);
            if (i == n / 2 || j == n / 2) mult = 0.0;
            spec[std::size_t(i) * n + j] *= mult * nm;
        }
    }
    fft2_inplace(spec.data(), n, +1);
    res.u = std::move(spec);
    return res;
}

// --- stress-energy field -----------------------------------------------------

SeField::SeField(const Sampler& smp, const Point& z, double q) : z_(z) {
    const auto& surf = smp.surface();
    if (surf.kind() == SurfaceKind::Sphere &&
        (std::abs(z.z) > 10.0 || std::abs(z.z) < 0.02))
        throw ConfigError("se_field: z outside the chart guard");
    q_ = q;
    auto d1 = smp.point_eval_deriv(z, 1);
    auto d2 = smp.point_eval_deriv(z, 2);
    int nm = smp.num_modes();
    d1r_.resize(nm);
    d1i_.resize(nm);
    d2r_.resize(nm);
    d2i_.resize(nm);
    for (int n = 0; n < nm; ++n) {
        d1r_[n] = d1[n].real();
        d1i_[n] = d1[n].imag();
        d2r_[n] = d2[n].real();
        d2i_[n] = d2[n].imag();
        e_dx2_ += d1[n] * d1[n];
    }
    if (surf.kind() == SurfaceKind::Sphere) {
        cplx w = z.z;
        double opr2 = 1.0 + std::norm(w);
        dsig_ = -2.0 * std::conj(w) / opr2;
        ddsig_ = 2.0 * std::conj(w) * std::conj(w) / (opr2 * opr2);
        t_sigma_ = 0.0;  // round metric: d^2 sigma - (d sigma)^2/2 = 0
    } else {
        dsig_ = ddsig_ = 0.0;
        t_sigma_ = 0.0;
    }
}

cplx SeField::value(const Sampler::Work& w, cplx shift_d1,
                    cplx shift_d2) const {
    const auto& sd = simd::active();
    std::size_t nm = d1r_.size();
    cplx dx(sd.dot(d1r_.data(), w.normals.data(), nm),
            sd.dot(d1i_.data(), w.normals.data(), nm));
    cplx ddx(sd.dot(d2r_.data(), w.normals.data(), nm),
             sd.dot(d2i_.data(), w.normals.data(), nm));
    dx += shift_d1;
    ddx += shift_d2;
    double Q = q_;
    cplx y = dx + 0.5 * Q * dsig_;
    return Q * (ddx + 0.5 * Q * ddsig_) - y * y + e_dx2_ +
           t_sigma_ / 12.0;
}

cplx se_two_point_oracle(const Sampler& smp, const Point& z, const Point& w,
                         double q) {
    // Cov[T(z), T(w)] for the pure field; E[T] = 0 on the base metrics
    auto d1z = smp.point_eval_deriv(z, 1), d2z = smp.point_eval_deriv(z, 2);
    auto d1w = smp.point_eval_deriv(w, 1), d2w = smp.point_eval_deriv(w, 2);
    int nm = smp.num_modes();
    cplx g11(0, 0), g12(0, 0), g21(0, 0), g22(0, 0);
    for (int n = 0; n < nm; ++n) {
        g11 += d1z[n] * d1w[n];
        g12 += d1z[n] * d2w[n];
        g21 += d2z[n] * d1w[n];
        g22 += d2z[n] * d2w[n];
    }
    double Q = q;
    auto dsig = [&](const Point& p) -> cplx {
        if (smp.surface().kind() != SurfaceKind::Sphere) return 0.0;
        return -2.0 * std::conj(p.z) / (1.0 + std::norm(p.z));
    };
    cplx cz = 0.5 * Q * dsig(z), cw = 0.5 * Q * dsig(w);
    return Q * Q * g22 - 2.0 * Q * (cw * g21 + cz * g12) + 2.0 * g11 * g11 +
           4.0 * cz * cw * g11;
}

cplx se_pair_oracle(const Sampler& smp, const Point& z,
                    const std::vector<double>& f_coeff, double q) {
    auto d1 = smp.point_eval_deriv(z, 1), d2 = smp.point_eval_deriv(z, 2);
    int nm = smp.num_modes();
    // (X, f) = sum_n a_n sqrt(2pi/lambda) <e_n, f>; Cov with dX, d2X
    cplx c1(0, 0), c2(0, 0);
    for (int n = 0; n < nm; ++n) {
        double fn = f_coeff[n] * std::sqrt(two_pi / smp.basis().lambda(n));
        c1 += d1[n] * fn;
        c2 += d2[n] * fn;
    }
    double Q = q;
    cplx dsig = smp.surface().kind() == SurfaceKind::Sphere
                    ? -2.0 * std::conj(z.z) / (1.0 + std::norm(z.z))
                    : cplx(0, 0);
    return Q * c2 - 2.0 * (0.5 * Q * dsig) * c1;
}

}  // namespace llab::ward

namespace llab {
namespace ward {

// --- Ward identity, n = 1, sphere --------------------------------------------

namespace {

struct InsertionData {
    Point x;
    double alpha;
    std::vector<double> kre, kim;  // d1 G(x_j, .) on the MC grid
};

// d/dz_first of the truncated Green kernel between two points
cplx dgreen_pt(const Sampler& smp, const Point& a, const Point& b) {
    auto d1 = smp.point_eval_deriv(a, 1);
    std::vector<double> eb(smp.num_modes());
    smp.basis().eval_all(b, eb.data());
    cplx acc(0, 0);
    for (int n = 0; n < smp.num_modes(); ++n) {
        double sc = std::sqrt(two_pi / smp.basis().lambda(n));
        acc += d1[n] * sc * eb[n];
    }
    return acc;
}

// complex grid of d1 G(a, y) over the MC grid, as two real fields
void dgreen_field(const Sampler& smp, const Point& a, std::vector<double>& re,
                  std::vector<double>& im) {
    auto d1 = smp.point_eval_deriv(a, 1);
    int nm = smp.num_modes();
    std::vector<double> cr(nm), ci(nm);
    for (int n = 0; n < nm; ++n) {
        double sc = std::sqrt(two_pi / smp.basis().lambda(n));
        cr[n] = d1[n].real() * sc;
        ci[n] = d1[n].imag() * sc;
    }
    re = smp.mc_synthesize(cr);
    im = smp.mc_synthesize(ci);
}

}  // namespace

WardReport ward_n1_check(const CorrelatorSpec& spec_in,
                         const std::vector<cplx>& z_list,
                         const McParams& params, double pv_radius,
                         std::uint64_t pv_samples) {
    if (spec_in.surface != SurfaceKind::Sphere)
        throw ConfigError("ward_n1_check: sphere only");
    CorrelatorSpec spec = spec_in;
    Sampler smp(spec.surface, params);
    Channel ch = build_channel(smp, spec, WeylSpec{});
    double gamma = spec.gamma;
    double Q = geometry::background_charge(gamma);
    double s = ch.s;
    int nins = int(spec.insertions.size());
    int nz = int(z_list.size());

    // guard: z points away from insertions (8 MC grid spacings)
    int nth_eff = params.ring_theta > 0 ? params.ring_theta
                                        : 2 * params.cutoff + 16;
    double guard = 8.0 * pi / nth_eff;
    for (const auto& zz : z_list)
        for (const auto& ins : spec.insertions)
            if (smp.surface().distance({0, zz}, smp.surface().canonical(ins.x)) <
                guard)
                throw ConfigError("ward: z too close to an insertion");

    // per-insertion kernels
    std::vector<InsertionData> ins(nins);
    for (int j = 0; j < nins; ++j) {
        ins[j].x = smp.surface().canonical(spec.insertions[j].x);
        ins[j].alpha = spec.insertions[j].alpha;
        dgreen_field(smp, ins[j].x, ins[j].kre, ins[j].kim);
    }
    // se-field machinery with the Girsanov shift derivatives at each z
    std::vector<SeField> se;
    std::vector<cplx> shift1(nz, cplx(0, 0)), shift2(nz, cplx(0, 0));
    for (int k = 0; k < nz; ++k) {
        Point zp{0, z_list[k]};
        se.emplace_back(smp, zp, Q);
        auto d1 = smp.point_eval_deriv(zp, 1);
        auto d2 = smp.point_eval_deriv(zp, 2);
        for (int j = 0; j < nins; ++j) {
            std::vector<double> ej(smp.num_modes());
            smp.basis().eval_all(ins[j].x, ej.data());
            for (int n = 0; n < smp.num_modes(); ++n) {
                double sc = std::sqrt(two_pi / smp.basis().lambda(n));
                shift1[k] += ins[j].alpha * d1[n] * sc * ej[n];
                shift2[k] += ins[j].alpha * d2[n] * sc * ej[n];
            }
        }
    }

    // observables: [0] W; per z: T W (re, im); per j: U_j (re, im)
    std::size_t dim = 1 + 2 * nz + 2 * nins;
    auto stats = mc::run_mc(
        params.samples, dim, params.workers,
        [&](std::uint64_t idx, double* obs) {
            thread_local Sampler::Work w;
            if (w.field.size() != smp.mc_size() ||
                w.normals.size() != std::size_t(smp.num_modes()) + 1)
                w = smp.make_work();
            smp.synthesize(params.seed, idx, w);
            // T needs the raw normals; densities next
            std::vector<cplx> tval(nz);
            for (int k = 0; k < nz; ++k)
                tval[k] = se[k].value(w, shift1[k], shift2[k]);
            for (auto& v : w.field) v *= gamma;
            simd::active().exp_v(w.field.data(), w.dens.data(), w.dens.size());
            double m = simd::active().dot(ch.wtilde.data(), w.dens.data(),
                                          w.dens.size());
            double lw = std::log(m) - ch.log_mass_det;
            double wt = std::exp(-s * lw);
            double wt1 = std::exp(-(s + 1.0) * lw) / ch.mass_det;
            obs[0] = wt;
            for (int k = 0; k < nz; ++k) {
                obs[1 + 2 * k] = (tval[k] * wt).real();
                obs[2 + 2 * k] = (tval[k] * wt).imag();
            }
            for (int j = 0; j < nins; ++j) {
                double rr = simd::active().dot3(ins[j].kre.data(),
                                                ch.wtilde.data(),
                                                w.dens.data(), w.dens.size());
                double ri = simd::active().dot3(ins[j].kim.data(),
                                                ch.wtilde.data(),
                                                w.dens.data(), w.dens.size());
                obs[1 + 2 * nz + 2 * j] = rr * wt1;
                obs[2 + 2 * nz + 2 * j] = ri * wt1;
            }
        });

    WardReport rep;
    rep.samples = stats.total_samples();
    // cross-insertion derivative constants
    std::vector<cplx> cross(nins, cplx(0, 0));
    for (int j = 0; j < nins; ++j)
        for (int i = 0; i < nins; ++i)
            if (i != j)
                cross[j] += ins[j].alpha * ins[i].alpha *
                            dgreen_pt(smp, ins[j].x, ins[i].x);
    auto rhs_value = [&](const std::vector<double>& m, int k) {
        cplx acc(0, 0);
        for (int j = 0; j < nins; ++j) {
            cplx u(m[1 + 2 * nz + 2 * j], m[2 + 2 * nz + 2 * j]);
            cplx dj = cross[j] - s * gamma * ins[j].alpha * u / m[0];
            cplx dz = z_list[k] - ins[j].x.z;
            double delta_j =
                geometry::conformal_weight(ins[j].alpha, gamma);
            acc += delta_j / (dz * dz) + dj / dz;
        }
        return acc;
    };
    for (int k = 0; k < nz; ++k) {
        WardPoint pt;
        pt.z = z_list[k];
        auto jk_lr = stats.jackknife([&](const std::vector<double>& m) {
            return m[1 + 2 * k] / m[0];
        });
        auto jk_li = stats.jackknife([&](const std::vector<double>& m) {
            return m[2 + 2 * k] / m[0];
        });
        pt.lhs = cplx(jk_lr.value, jk_li.value);
        pt.lhs_err = std::hypot(jk_lr.stderr_, jk_li.stderr_);
        auto jk_rr = stats.jackknife([&](const std::vector<double>& m) {
            return rhs_value(m, k).real();
        });
        auto jk_ri = stats.jackknife([&](const std::vector<double>& m) {
            return rhs_value(m, k).imag();
        });
        pt.rhs = cplx(jk_rr.value, jk_ri.value);
        pt.rhs_err = std::hypot(jk_rr.stderr_, jk_ri.stderr_);
        pt.rel_dev = std::abs(pt.lhs - pt.rhs) / std::abs(pt.rhs);
        rep.points.push_back(pt);
    }

    // ---- PV sub-check around the first insertion ----------------------------
    if (pv_samples == 0) pv_samples = std::min<std::uint64_t>(params.samples, 10000);
    const Point& x0 = ins[0].x;
    double a0 = ins[0].alpha;
    // chart-disk radii r, r/2, r/4
    std::vector<double> radii = {pv_radius, pv_radius / 2, pv_radius / 4};

    struct PvPre {
        std::vector<std::size_t> bcells;
        std::vector<double> sm;           // smooth-kernel part over B (re/im in pairs)
        std::vector<double> smi;
        std::vector<double> out_re, out_im;  // excised kernel grids
        std::vector<double> sig_re, sig_im;  // d sigma over B cells
        std::vector<std::vector<cplx>> crs;  // per j != 0: d1G(y, x_j) at B cells
        std::vector<std::vector<double>> dblr, dbli;  // per B cell: d1G(z,.) grids
        std::vector<cplx> contour;            // contour points
        std::vector<cplx> tiltc;              // deterministic tilt at contour pts
        std::vector<std::vector<double>> cev;  // eval vectors at contour pts
        double rho = 0.0;
    };
    std::vector<PvPre> pre(radii.size());
    const auto& wq = smp.mc_weights();
    double lgd0 = 0.5 * gamma * gamma * std::log(smp.delta());
    for (std::size_t rl = 0; rl < radii.size(); ++rl) {
        PvPre& P = pre[rl];
        P.rho = radii[rl];
        for (std::size_t i = 0; i < smp.mc_size(); ++i) {
            Point p = smp.mc_point(i);
            if (std::abs(p.z - x0.z) <= P.rho) P.bcells.push_back(i);
        }
        dgreen_field(smp, x0, P.out_re, P.out_im);
        // smooth kernel S(y) = d1G(x0, y) + d1G(y, x0) on B cells
        for (auto i : P.bcells) {
            Point p = smp.mc_point(i);
            cplx sv = cplx(P.out_re[i], P.out_im[i]) + dgreen_pt(smp, p, x0);
            P.sm.push_back(sv.real());
            P.smi.push_back(sv.imag());
            cplx w0 = p.z;
            P.sig_re.push_back((-2.0 * std::conj(w0) / (1.0 + std::norm(w0)))
                                   .real());
            P.sig_im.push_back((-2.0 * std::conj(w0) / (1.0 + std::norm(w0)))
                                   .imag());
        }
        // zero the kernel inside B for the excised reduction
        for (auto i : P.bcells) {
            P.out_re[i] = 0.0;
            P.out_im[i] = 0.0;
        }
        P.crs.assign(nins, {});
        for (int j = 1; j < nins; ++j)
            for (auto i : P.bcells)
                P.crs[j].push_back(dgreen_pt(smp, smp.mc_point(i), ins[j].x));
        for (auto i : P.bcells) {
            std::vector<double> re, im;
            dgreen_field(smp, smp.mc_point(i), re, im);
            P.dblr.push_back(std::move(re));
            P.dbli.push_back(std::move(im));
        }
        // contour
        const int nc = 64;
        for (int t = 0; t < nc; ++t) {
            cplx zc = x0.z + std::polar(P.rho, two_pi * t / nc);
            P.contour.push_back(zc);
            Point pc{0, zc};
            double tl = 0.0;
            for (int j = 0; j < nins; ++j)
                tl += ins[j].alpha * smp.cov(pc, ins[j].x);
            P.tiltc.push_back(std::exp(gamma * tl + lgd0));
            P.cev.push_back(smp.point_eval(pc, true));
        }
    }

    // PV observables per radius: o1(Out), o1(Smooth), o1(Bnd re/im),
    // o1(Sig re/im), o1(Crs re/im), o2(Dbl re/im), plus W and o1(direct)
    std::size_t pdim = 1 + 2 + radii.size() * 12;
    auto pstats = mc::run_mc(
        pv_samples, pdim, params.workers,
        [&](std::uint64_t idx, double* obs) {
            thread_local Sampler::Work w;
            if (w.field.size() != smp.mc_size() ||
                w.normals.size() != std::size_t(smp.num_modes()) + 1)
                w = smp.make_work();
            smp.synthesize(params.seed ^ 0x5851f42d4c957f2dULL, idx, w);
            // contour values use the raw normals (eval dots), the grid only
            // feeds the densities
            for (auto& v : w.field) v *= gamma;
            simd::active().exp_v(w.field.data(), w.dens.data(), w.dens.size());
            double m = simd::active().dot(ch.wtilde.data(), w.dens.data(),
                                          w.dens.size());
            double lw = std::log(m) - ch.log_mass_det;
            double wt = std::exp(-s * lw);
            double o1 = std::exp(-(s + 1.0) * lw) / ch.mass_det;
            double o2 = std::exp(-(s + 2.0) * lw) / (ch.mass_det * ch.mass_det);
            obs[0] = wt;
            // direct full-range reduction
            double dr = simd::active().dot3(ins[0].kre.data(), ch.wtilde.data(),
                                            w.dens.data(), w.dens.size());
            double di = simd::active().dot3(ins[0].kim.data(), ch.wtilde.data(),
                                            w.dens.data(), w.dens.size());
            // note: kre/kim were zeroed inside B for radius levels, so keep a
            // separate untouched copy (ins[0] fields) -- they are untouched;
            // PvPre holds its own excised copies
            obs[1] = dr * o1;
            obs[2] = di * o1;
            std::size_t off = 3;
            for (std::size_t rl = 0; rl < radii.size(); ++rl) {
                const PvPre& P = pre[rl];
                double out_r = simd::active().dot3(P.out_re.data(),
                                                   ch.wtilde.data(),
                                                   w.dens.data(), w.dens.size());
                double out_i = simd::active().dot3(P.out_im.data(),
                                                   ch.wtilde.data(),
                                                   w.dens.data(), w.dens.size());
                cplx smooth(0, 0), sig(0, 0), crs(0, 0), dbl(0, 0);
                for (std::size_t b = 0; b < P.bcells.size(); ++b) {
                    std::size_t i = P.bcells[b];
                    double Fb = ch.wtilde[i] * w.dens[i];
                    smooth += cplx(P.sm[b], P.smi[b]) * Fb;
                    sig += cplx(P.sig_re[b], P.sig_im[b]) * Fb;
                    for (int j = 1; j < nins; ++j)
                        crs += gamma * ins[j].alpha * P.crs[j][b] * Fb;
                    double qr = simd::active().dot3(P.dblr[b].data(),
                                                    ch.wtilde.data(),
                                                    w.dens.data(),
                                                    w.dens.size());
                    double qi = simd::active().dot3(P.dbli[b].data(),
                                                    ch.wtilde.data(),
                                                    w.dens.data(),
                                                    w.dens.size());
                    dbl += cplx(qr, qi) * Fb;
                }
                // contour: (i/2) Int f e^sigma dzbar
                cplx bnd(0, 0);
                const int nc = int(P.contour.size());
                for (int t = 0; t < nc; ++t) {
                    double xv = simd::active().dot(P.cev[t].data(),
                                                   w.normals.data(),
                                                   P.cev[t].size());
                    cplx zc = P.contour[t];
                    double sg = std::log(4.0) - 2.0 * std::log1p(std::norm(zc));
                    cplx fz = P.tiltc[t] * std::exp(gamma * xv) * std::exp(sg);
                    cplx dzb =
                        -cplx(0, 1) *
                        std::conj(std::polar(1.0, two_pi * t / nc)) * P.rho *
                        (two_pi / nc);
                    bnd += cplx(0, 0.5) * fz * dzb;
                }
                obs[off + 0] = out_r * o1;
                obs[off + 1] = out_i * o1;
                obs[off + 2] = smooth.real() * o1;
                obs[off + 3] = smooth.imag() * o1;
                obs[off + 4] = bnd.real() * o1;
                obs[off + 5] = bnd.imag() * o1;
                obs[off + 6] = sig.real() * o1;
                obs[off + 7] = sig.imag() * o1;
                obs[off + 8] = crs.real() * o1;
                obs[off + 9] = crs.imag() * o1;
                obs[off + 10] = dbl.real() * o2;
                obs[off + 11] = dbl.imag() * o2;
                off += 12;
            }
        });

    auto pv_value = [&](const std::vector<double>& m, std::size_t rl,
                        bool real_part) {
        std::size_t off = 3 + rl * 12;
        cplx out(m[off + 0], m[off + 1]);
        cplx smooth(m[off + 2], m[off + 3]);
        cplx bnd(m[off + 4], m[off + 5]);
        cplx sig(m[off + 6], m[off + 7]);
        cplx crs(m[off + 8], m[off + 9]);
        cplx dbl(m[off + 10], m[off + 11]);
        cplx psing =
            (bnd - sig - crs + (s + 1.0) * gamma * gamma * dbl) / (gamma * a0);
        cplx pot = (out + smooth - psing) / m[0];
        return real_part ? pot.real() : pot.imag();
    };
    for (std::size_t rl = 0; rl < radii.size(); ++rl) {
        PvLevel lvl;
        lvl.r = radii[rl];
        auto jr = pstats.jackknife(
            [&](const std::vector<double>& m) { return pv_value(m, rl, true); });
        auto ji = pstats.jackknife(
            [&](const std::vector<double>& m) { return pv_value(m, rl, false); });
        lvl.pot = cplx(jr.value, ji.value);
        lvl.err = std::hypot(jr.stderr_, ji.stderr_);
        rep.pv.push_back(lvl);
    }
    auto jdr = pstats.jackknife(
        [&](const std::vector<double>& m) { return m[1] / m[0]; });
    auto jdi = pstats.jackknife(
        [&](const std::vector<double>& m) { return m[2] / m[0]; });
    rep.pot_direct = cplx(jdr.value, jdi.value);
    rep.pot_direct_err = std::hypot(jdr.stderr_, jdi.stderr_);
    rep.pv_stable = true;
    for (std::size_t rl = 0; rl < radii.size(); ++rl) {
        double tol = 3.0 * (rep.pv[rl].err + rep.pot_direct_err) +
                     1e-3 * std::abs(rep.pot_direct);
        if (std::abs(rep.pv[rl].pot - rep.pot_direct) > tol)
            rep.pv_stable = false;
    }
    return rep;
}

}  // namespace ward
}  // namespace llab
