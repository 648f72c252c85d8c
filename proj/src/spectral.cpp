#include "llab/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "llab/detail/legendre.hpp"
#include "llab/fft.hpp"
#include "llab/simd.hpp"

namespace llab::spectral {

using geometry::SurfaceKind;

namespace {

struct SphAngles {
    double t;    // cos(theta)
    double phi;  // azimuth
    double sgn;  // +1 chart 0, -1 chart 1 (t and phi flip together)
    cplx z;      // chart coordinate
};

SphAngles sph_angles(const Point& p) {
    double r2 = std::norm(p.z);
    double sgn = p.chart == 0 ? 1.0 : -1.0;
    double t = sgn * (1.0 - r2) / (1.0 + r2);
    double phi = sgn * std::atan2(p.z.imag(), p.z.real());
    return {t, phi, sgn, p.z};
}

int tri(int l, int m) { return l * (l + 1) / 2 + m; }

// zonal Green sum: (1/2) sum_l (2l+1) P_l(cos d) w_l / (l(l+1))
double zonal_green(int L, double cosd, const double* pl_delta2 = nullptr) {
    std::vector<double> pl(L + 1);
    detail::legendre_pl(L, cosd, pl.data());
    double acc = 0.0;
    for (int l = 1; l <= L; ++l) {
        double w = pl_delta2 ? pl_delta2[l] : 1.0;
        acc += (2.0 * l + 1.0) * w * pl[l] / (double(l) * (l + 1));
    }
    return 0.5 * acc;
}

}  // namespace

SpectralBasis SpectralBasis::build(const Surface& s, int cutoff) {
    if (cutoff < 2)
        throw ConfigError("build_basis: cutoff too small for a usable basis");
    SpectralBasis b;
    b.surf_ = std::make_shared<Surface>(s);
    b.cutoff_ = cutoff;
    if (s.kind() == SurfaceKind::Torus) {
        struct K {
            int kx, ky;
            double lam;
        };
        std::vector<K> ks;
        for (int ky = 0; ky <= cutoff; ++ky)
            for (int kx = -cutoff; kx <= cutoff; ++kx) {
                if (ky == 0 && kx <= 0) continue;
                double k2 = double(kx) * kx + double(ky) * ky;
                if (k2 > double(cutoff) * cutoff) continue;
                ks.push_back({kx, ky, 4.0 * pi * pi * k2});
            }
        std::sort(ks.begin(), ks.end(), [](const K& a, const K& c) {
            if (a.lam != c.lam) return a.lam < c.lam;
            if (a.ky != c.ky) return a.ky < c.ky;
            return a.kx < c.kx;
        });
        for (const auto& k : ks) {
            b.mode_.push_back({k.kx, k.ky, false});
            b.lambda_.push_back(k.lam);
            b.mode_.push_back({k.kx, k.ky, true});
            b.lambda_.push_back(k.lam);
        }
    } else {
        for (int l = 1; l <= cutoff; ++l) {
            double lam = double(l) * (l + 1);
            b.mode_.push_back({l, 0, false});
            b.lambda_.push_back(lam);
            for (int m = 1; m <= l; ++m) {
                b.mode_.push_back({l, m, false});
                b.lambda_.push_back(lam);
                b.mode_.push_back({l, m, true});
                b.lambda_.push_back(lam);
            }
        }
    }
    if (b.num_modes() < 8)
        throw ConfigError("build_basis: mode count below 8");
    return b;
}

void SpectralBasis::eval_torus_all(const Point& p, double* out) const {
    double x = p.z.real(), y = p.z.imag();
    const double r2 = std::sqrt(2.0);
    for (int n = 0; n < num_modes(); n += 2) {
        const ModeId& m = mode_[n];
        double th = two_pi * (m.a * x + m.b * y);
        out[n] = r2 * std::cos(th);
        out[n + 1] = r2 * std::sin(th);
    }
}

void SpectralBasis::eval_sphere_all(const Point& p, double* out) const {
    auto ang = sph_angles(p);
    int L = cutoff_;
    std::vector<double> pl(tri(L, L) + 1);
    detail::legendre_all(L, ang.t, pl.data());
    std::vector<double> cm(L + 1), sm(L + 1);
    for (int m = 0; m <= L; ++m) {
        cm[m] = std::cos(m * ang.phi);
        sm[m] = std::sin(m * ang.phi);
    }
    const double inv_s2pi = 1.0 / std::sqrt(two_pi);
    const double inv_spi = 1.0 / std::sqrt(pi);
    for (int n = 0; n < num_modes(); ++n) {
        const ModeId& md = mode_[n];
        double P = pl[tri(md.a, md.b)];
        if (md.b == 0)
            out[n] = P * inv_s2pi;
        else
            out[n] = P * (md.is_sin ? sm[md.b] : cm[md.b]) * inv_spi;
    }
}

void SpectralBasis::eval_all(const Point& p, double* out) const {
    if (surf_->kind() == SurfaceKind::Torus)
        eval_torus_all(p, out);
    else
        eval_sphere_all(p, out);
}

double SpectralBasis::eval(int n, const Point& p) const {
    if (surf_->kind() == SurfaceKind::Torus) {
        const ModeId& m = mode_[n];
        double th = two_pi * (m.a * p.z.real() + m.b * p.z.imag());
        return std::sqrt(2.0) * (m.is_sin ? std::sin(th) : std::cos(th));
    }
    std::vector<double> all(num_modes());
    eval_sphere_all(p, all.data());
    return all[n];
}

void SpectralBasis::eval_derivs(const Point& p, cplx* d1, cplx* d2) const {
    if (surf_->kind() == SurfaceKind::Torus) {
        const double r2 = std::sqrt(2.0);
        for (int n = 0; n < num_modes(); n += 2) {
            const ModeId& m = mode_[n];
            double th = two_pi * (m.a * p.z.real() + m.b * p.z.imag());
            cplx g1 = pi * cplx(m.a, -double(m.b));
            double c = std::cos(th), s = std::sin(th);
            d1[n] = -r2 * g1 * s;
            d1[n + 1] = r2 * g1 * c;
            d2[n] = -r2 * g1 * g1 * c;
            d2[n + 1] = -r2 * g1 * g1 * s;
        }
        return;
    }
    auto ang = sph_angles(p);
    int L = cutoff_;
    if (std::abs(ang.z) < 1e-9)
        throw DomainError("eval_derivs: point too close to a chart pole");
    double r2n = std::norm(ang.z);
    double opr2 = 1.0 + r2n;
    cplx zb = std::conj(ang.z);
    cplx dt = -ang.sgn * 2.0 * zb / (opr2 * opr2);
    cplx ddt = ang.sgn * 4.0 * zb * zb / (opr2 * opr2 * opr2);
    cplx dphi = -ang.sgn * cplx(0, 0.5) / ang.z;
    cplx ddphi = ang.sgn * cplx(0, 0.5) / (ang.z * ang.z);

    std::vector<double> pl(tri(L, L) + 1), dp(pl.size()), ddp(pl.size());
    detail::legendre_all(L, ang.t, pl.data());
    detail::legendre_derivs(L, ang.t, pl.data(), dp.data());
    detail::legendre_second(L, ang.t, pl.data(), dp.data(), ddp.data());
    std::vector<double> cm(L + 1), sm(L + 1);
    for (int m = 0; m <= L; ++m) {
        cm[m] = std::cos(m * ang.phi);
        sm[m] = std::sin(m * ang.phi);
    }
    const double inv_s2pi = 1.0 / std::sqrt(two_pi);
    const double inv_spi = 1.0 / std::sqrt(pi);
    for (int n = 0; n < num_modes(); ++n) {
        const ModeId& md = mode_[n];
        int l = md.a, m = md.b;
        double P = pl[tri(l, m)], Pp = dp[tri(l, m)], Ppp = ddp[tri(l, m)];
        double norm = m == 0 ? inv_s2pi : inv_spi;
        double cv = cm[m], sv = sm[m];
        double ang_v = md.is_sin ? sv : cv;   // angular factor
        double ang_d = md.is_sin ? cv : -sv;  // d/d(m phi) of it
        d1[n] = norm * (Pp * dt * ang_v + P * double(m) * ang_d * dphi);
        d2[n] = norm * (Ppp * dt * dt * ang_v + Pp * ddt * ang_v +
                        2.0 * Pp * dt * double(m) * ang_d * dphi +
                        P * double(m) * double(m) * (-ang_v) * dphi * dphi +
                        P * double(m) * ang_d * ddphi);
    }
}

std::vector<double> SpectralBasis::mode_grid(int n) const {
    const Surface& s = *surf_;
    std::vector<double> out(s.grid_size());
    if (s.kind() == SurfaceKind::Torus) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = eval(n, s.point(i));
        return out;
    }
    std::vector<double> evals(num_modes());
    for (std::size_t i = 0; i < out.size(); ++i) {
        eval_sphere_all(s.point(i), evals.data());
        out[i] = evals[n];
    }
    return out;
}

std::vector<double> SpectralBasis::project(const std::vector<double>& f) const {
    const Surface& s = *surf_;
    std::vector<double> coeff(num_modes(), 0.0);
    if (s.kind() == SurfaceKind::Torus) {
        int n = s.n();
        if (2 * cutoff_ >= n)
            throw ConfigError("project: cutoff too large for grid");
        std::vector<cplx> spec(std::size_t(n) * n);
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = f[i];
        fft2_inplace(spec.data(), n, -1);
        double norm = 1.0 / (double(n) * n);
        for (int i = 0; i < num_modes(); i += 2) {
            const ModeId& m = mode_[i];
            int ii = (m.b % n + n) % n, jj = (m.a % n + n) % n;
            cplx fh = spec[std::size_t(ii) * n + jj] * norm;
            coeff[i] = std::sqrt(2.0) * fh.real();
            coeff[i + 1] = -std::sqrt(2.0) * fh.imag();
        }
        return coeff;
    }
    std::vector<double> evals(num_modes());
    const auto& w = s.weights();
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        if (w[i] == 0.0) continue;
        eval_sphere_all(s.point(i), evals.data());
        simd::active().axpy(w[i] * f[i], evals.data(), coeff.data(),
                            coeff.size());
    }
    return coeff;
}

std::vector<double> SpectralBasis::synthesize(
    const std::vector<double>& coeff) const {
    const Surface& s = *surf_;
    std::vector<double> out(s.grid_size(), 0.0);
    if (s.kind() == SurfaceKind::Torus) {
        int n = s.n();
        if (2 * cutoff_ >= n)
            throw ConfigError("synthesize: cutoff too large for grid");
        std::vector<cplx> spec(std::size_t(n) * n, cplx(0, 0));
        for (int i = 0; i < num_modes(); i += 2) {
            const ModeId& m = mode_[i];
            cplx a = cplx(coeff[i], -coeff[i + 1]) / std::sqrt(2.0);
            int ii = (m.b % n + n) % n, jj = (m.a % n + n) % n;
            int ii2 = (n - ii) % n, jj2 = (n - jj) % n;
            spec[std::size_t(ii) * n + jj] += a;
            spec[std::size_t(ii2) * n + jj2] += std::conj(a);
        }
        Fft2Workspace ws(n);
        ws.synthesize_real(spec.data(), out.data());
        return out;
    }
    std::vector<double> evals(num_modes());
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        eval_sphere_all(s.point(i), evals.data());
        out[i] = simd::active().dot(evals.data(), coeff.data(), coeff.size());
    }
    return out;
}

double SpectralBasis::green(const Point& x, const Point& y) const {
    const Surface& s = *surf_;
    if (s.distance(x, y) < 1e-12)
        throw DomainError(
            "green: diagonal evaluation; use circle_averaged_green");
    if (s.kind() == SurfaceKind::Torus) {
        double dx = x.z.real() - y.z.real();
        double dy = x.z.imag() - y.z.imag();
        int L = cutoff_;
        double acc = 0.0;
        for (int ky = -L; ky <= L; ++ky)
            for (int kx = -L; kx <= L; ++kx) {
                double k2 = double(kx) * kx + double(ky) * ky;
                if (k2 == 0.0 || k2 > double(L) * L) continue;
                acc += std::cos(two_pi * (kx * dx + ky * dy)) / k2;
            }
        return acc / two_pi;
    }
    return zonal_green(cutoff_, std::cos(s.distance(x, y)));
}

std::vector<double> SpectralBasis::green_field(const Point& x) const {
    const Surface& s = *surf_;
    std::vector<double> out(s.grid_size());
    if (s.kind() == SurfaceKind::Torus) {
        int n = s.n();
        if (2 * cutoff_ >= n)
            throw ConfigError("green_field: cutoff too large for grid");
        std::vector<cplx> spec(std::size_t(n) * n, cplx(0, 0));
        int L = cutoff_;
        for (int ky = -L; ky <= L; ++ky)
            for (int kx = -L; kx <= L; ++kx) {
                double k2 = double(kx) * kx + double(ky) * ky;
                if (k2 == 0.0 || k2 > double(L) * L) continue;
                double phase = -two_pi * (kx * x.z.real() + ky * x.z.imag());
                int ii = (ky % n + n) % n, jj = (kx % n + n) % n;
                spec[std::size_t(ii) * n + jj] =
                    std::polar(1.0 / (two_pi * k2), phase);
            }
        Fft2Workspace ws(n);
        ws.synthesize_real(spec.data(), out.data());
        return out;
    }
    for (std::size_t i = 0; i < s.grid_size(); ++i)
        out[i] = zonal_green(cutoff_, std::cos(s.distance(x, s.point(i))));
    return out;
}

std::vector<double> SpectralBasis::circle_multiplier(double delta) const {
    std::vector<double> mult(num_modes());
    if (surf_->kind() == SurfaceKind::Torus) {
        for (int n = 0; n < num_modes(); ++n) {
            double kk = std::hypot(double(mode_[n].a), double(mode_[n].b));
            mult[n] = std::cyl_bessel_j(0.0, two_pi * kk * delta);
        }
    } else {
        std::vector<double> pl(cutoff_ + 1);
        detail::legendre_pl(cutoff_, std::cos(delta), pl.data());
        for (int n = 0; n < num_modes(); ++n) mult[n] = pl[mode_[n].a];
    }
    return mult;
}

std::vector<Point> SpectralBasis::circle_points(const Point& x,
                                                double delta) const {
    std::vector<Point> pts(kCirclePoints);
    double r = delta * std::exp(-surf_->sigma_at(x) / 2.0);
    for (int j = 0; j < kCirclePoints; ++j) {
        double th = two_pi * j / kCirclePoints;
        pts[j] = surf_->canonical({x.chart, x.z + std::polar(r, th)});
    }
    return pts;
}

PoissonResult poisson_solve(const SpectralBasis& b,
                            const std::vector<double>& rho) {
    const Surface& s = b.surface();
    PoissonResult res;
    res.removed_mean = s.integrate(rho) / s.volume();
    std::vector<double> coeff = b.project(rho);
    for (int n = 0; n < b.num_modes(); ++n) coeff[n] *= two_pi / b.lambda(n);
    res.u = b.synthesize(coeff);
    return res;
}

double green_weyl(const SpectralBasis& b, const WeylFactor& omega,
                  const Point& x, const Point& y) {
    const Surface& s = b.surface();
    const auto& w = s.weights();
    std::vector<double> ew(s.grid_size());
    for (std::size_t i = 0; i < ew.size(); ++i)
        ew[i] = std::exp(omega.omega[i]);
    double vol_hat = 0.0;
    for (std::size_t i = 0; i < ew.size(); ++i) vol_hat += w[i] * ew[i];

    auto gx = b.green_field(x);
    auto gy = b.green_field(y);
    double t2 = 0.0, t3 = 0.0;
    for (std::size_t i = 0; i < ew.size(); ++i) {
        t2 += w[i] * ew[i] * gx[i];
        t3 += w[i] * ew[i] * gy[i];
    }
    t2 /= vol_hat;
    t3 /= vol_hat;
    std::vector<double> proj = b.project(ew);
    double t4 = 0.0;
    for (int n = 0; n < b.num_modes(); ++n)
        t4 += (two_pi / b.lambda(n)) * proj[n] * proj[n];
    t4 /= vol_hat * vol_hat;
    return b.green(x, y) - t2 - t3 + t4;
}

// --- closed-form continuum Green kernels ------------------------------------

namespace {

// theta_1(v | tau = i) and its log-derivative; the series converges like
// exp(-pi n^2) for |Im v| <= pi/2, which the fundamental-domain reduction
// guarantees
cplx theta1(cplx v) {
    cplx acc(0, 0);
    for (int n = 0; n < 6; ++n) {
        double q = std::exp(-pi * (n + 0.5) * (n + 0.5));
        double sgn = n % 2 ? -1.0 : 1.0;
        acc += 2.0 * sgn * q * std::sin((2.0 * n + 1.0) * v);
    }
    return acc;
}

cplx theta1_logderiv(cplx v) {
    cplx num(0, 0), den(0, 0);
    for (int n = 0; n < 6; ++n) {
        double q = std::exp(-pi * (n + 0.5) * (n + 0.5));
        double sgn = n % 2 ? -1.0 : 1.0;
        num += 2.0 * sgn * q * (2.0 * n + 1.0) * std::cos((2.0 * n + 1.0) * v);
        den += 2.0 * sgn * q * std::sin((2.0 * n + 1.0) * v);
    }
    return num / den;
}

// zero-mean constant of the torus Green function, computed once
double torus_green_const() {
    static const double c0 = [] {
        int n = 1024;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double x = (j + 0.5) / n - 0.5, y = (i + 0.5) / n - 0.5;
                cplx v = pi * cplx(x, y);
                acc += -std::log(std::abs(theta1(v))) + pi * y * y;
            }
        return -acc / (double(n) * n);
    }();
    return c0;
}

cplx reduce_torus(cplx d) {
    double x = d.real() - std::floor(d.real() + 0.5);
    double y = d.imag() - std::floor(d.imag() + 0.5);
    return {x, y};
}

}  // namespace

double green_exact(const geometry::Surface& s, const Point& x,
                   const Point& y) {
    if (s.kind() == SurfaceKind::Torus) {
        cplx d = reduce_torus(x.z - y.z);
        return -std::log(std::abs(theta1(pi * d))) + pi * sq(d.imag()) +
               torus_green_const();
    }
    double d = s.distance(x, y);
    return -std::log(std::sin(0.5 * d)) - 0.5;
}

cplx green_exact_dz2(const geometry::Surface& s, const Point& x,
                     const Point& y) {
    // second chart derivative in the first argument
    if (s.kind() == SurfaceKind::Torus) {
        cplx d = reduce_torus(x.z - y.z);
        cplx v = pi * d;
        cplx num(0, 0), den(0, 0), num2(0, 0);
        for (int n = 0; n < 6; ++n) {
            double q = std::exp(-pi * (n + 0.5) * (n + 0.5));
            double sgn = n % 2 ? -1.0 : 1.0;
            double m = 2.0 * n + 1.0;
            den += 2.0 * sgn * q * std::sin(m * v);
            num += 2.0 * sgn * q * m * std::cos(m * v);
            num2 += -2.0 * sgn * q * m * m * std::sin(m * v);
        }
        cplx Q = num / den;
        cplx Qp = num2 / den - Q * Q;
        return -0.5 * pi * pi * Qp - 0.5 * pi;
    }
    cplx z = x.z, w;
    if (x.chart == y.chart)
        w = y.z;
    else {
        if (std::abs(y.z) < 1e-300)
            throw DomainError("green_exact_dz2: pole-to-pole evaluation");
        w = 1.0 / y.z;
    }
    cplx zb = std::conj(z);
    double opz = 1.0 + std::norm(z);
    return 0.5 / ((z - w) * (z - w)) - zb * zb / (2.0 * opz * opz);
}

cplx green_exact_dz(const geometry::Surface& s, const Point& x,
                    const Point& y) {
    if (s.kind() == SurfaceKind::Torus) {
        cplx d = reduce_torus(x.z - y.z);
        return -0.5 * pi * theta1_logderiv(pi * d) - cplx(0, pi) * d.imag();
    }
    // derivative in x's own chart coordinate
    cplx z = x.z, w;
    if (x.chart == y.chart)
        w = y.z;
    else {
        if (std::abs(y.z) < 1e-300)
            throw DomainError("green_exact_dz: pole-to-pole evaluation");
        w = 1.0 / y.z;
    }
    // G = -ln|z-w| + (1/2)ln(1+|z|^2) + const terms in w
    return -0.5 / (z - w) + std::conj(z) / (2.0 * (1.0 + std::norm(z)));
}

namespace {

double interp_torus(const std::vector<double>& g, int n, double x, double y) {
    x -= std::floor(x);
    y -= std::floor(y);
    double fx = x * n, fy = y * n;
    int j0 = int(fx) % n, i0 = int(fy) % n;
    double ax = fx - int(fx), ay = fy - int(fy);
    int j1 = (j0 + 1) % n, i1 = (i0 + 1) % n;
    return (1 - ay) * ((1 - ax) * g[std::size_t(i0) * n + j0] +
                       ax * g[std::size_t(i0) * n + j1]) +
           ay * ((1 - ax) * g[std::size_t(i1) * n + j0] +
                 ax * g[std::size_t(i1) * n + j1]);
}

cplx interp_torus_c(const std::vector<cplx>& g, int n, double x, double y) {
    x -= std::floor(x);
    y -= std::floor(y);
    double fx = x * n, fy = y * n;
    int j0 = int(fx) % n, i0 = int(fy) % n;
    double ax = fx - int(fx), ay = fy - int(fy);
    int j1 = (j0 + 1) % n, i1 = (i0 + 1) % n;
    return (1 - ay) * ((1 - ax) * g[std::size_t(i0) * n + j0] +
                       ax * g[std::size_t(i0) * n + j1]) +
           ay * ((1 - ax) * g[std::size_t(i1) * n + j0] +
                 ax * g[std::size_t(i1) * n + j1]);
}

std::vector<cplx> dz_field_torus(const std::vector<double>& f, int n) {
    std::vector<cplx> spec(std::size_t(n) * n);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = f[i];
    fft2_inplace(spec.data(), n, -1);
    double norm = 1.0 / (double(n) * n);
    for (int i = 0; i < n; ++i) {
        int ky = fft_freq(i, n);
        for (int j = 0; j < n; ++j) {
            int kx = fft_freq(j, n);
            cplx mult = cplx(0.0, pi) * cplx(kx, -ky);
            if (i == n / 2 || j == n / 2) mult = 0.0;
            spec[std::size_t(i) * n + j] *= mult * norm;
        }
    }
    fft2_inplace(spec.data(), n, +1);
    return spec;
}

}  // namespace

double green_variation(const SpectralBasis& b, const TensorField2& f,
                       const Point& x, const Point& y) {
    const Surface& s = b.surface();
    if (s.distance(x, y) < 1e-12)
        throw DomainError("green_variation: x = y not defined");
    const int n = s.n();
    const double h = s.spacing();
    const double patch_r = 4.0 * h;
    if (s.distance(x, y) < 3.0 * patch_r)
        throw DomainError(
            "green_variation: points closer than the guard radius");

    std::vector<double> tr_up = f.trace_g(s);
    const double vol = s.volume();
    const auto& w = s.weights();
    Point xc = s.canonical(x), yc = s.canonical(y);
    auto in_patch = [&](const Point& p) {
        return s.distance(p, xc) < patch_r || s.distance(p, yc) < patch_r;
    };

    // exact-kernel integrand of the variation formula at a point
    auto integrand = [&](const Point& p, cplx fzz, double trv) {
        cplx dgx = green_exact_dz(s, p, xc);  // d/dz_p G(p, x)
        cplx dgy = green_exact_dz(s, p, yc);
        double gx = green_exact(s, p, xc);
        double gy = green_exact(s, p, yc);
        double tt = -(1.0 / pi) * (fzz * dgx * dgy).real();
        double tr = trv / (2.0 * vol) * (gx + gy);
        return tt + tr;
    };

    bool torus = s.kind() == SurfaceKind::Torus;
    auto fields_at = [&](const Point& p, cplx& fzz, double& trv) {
        if (torus) {
            fzz = interp_torus_c(f.f_zz_up, n, p.z.real(), p.z.imag());
            trv = interp_torus(tr_up, n, p.z.real(), p.z.imag());
        } else {
            double bx = (p.z.real() + s.chart_box()) / h - 0.5;
            double by = (p.z.imag() + s.chart_box()) / h - 0.5;
            int jj = std::clamp(int(std::lround(bx)), 0, n - 1);
            int ii = std::clamp(int(std::lround(by)), 0, n - 1);
            std::size_t idx = s.index(p.chart, ii, jj);
            fzz = f.f_zz_up[idx];
            trv = tr_up[idx];
        }
    };
    auto eval_at = [&](const Point& p) {
        cplx fzz;
        double trv;
        fields_at(p, fzz, trv);
        return std::exp(s.sigma_at(p)) * integrand(p, fzz, trv);
    };

    double acc = 0.0;
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        if (w[i] == 0.0) continue;
        Point p = s.point(i);
        if (in_patch(p)) continue;  // replaced by refined/polar pieces below
        acc += w[i] * integrand(p, f.f_zz_up[i], tr_up[i]);
    }

    // refined cells inside the patch radius; the cells containing x or y get
    // a corner-rectangle polar quadrature that absorbs the 1/r singularity
    int reach = int(std::ceil(patch_r / h)) + 1;
    auto cell_center_index = [&](const Point& c, int& ci, int& cj) {
        if (torus) {
            cj = int(std::lround(c.z.real() * n)) % n;
            ci = int(std::lround(c.z.imag() * n)) % n;
        } else {
            cj = std::clamp(
                int(std::lround((c.z.real() + s.chart_box()) / h - 0.5)), 0,
                n - 1);
            ci = std::clamp(
                int(std::lround((c.z.imag() + s.chart_box()) / h - 0.5)), 0,
                n - 1);
        }
    };
    // polar integration of eval_at over the rectangle with corner at p
    // spanning signed extents (sx*wx, sy*wy)
    auto corner_polar = [&](const Point& psing, double sx, double wx,
                            double sy, double wy) {
        if (wx < 1e-14 || wy < 1e-14) return 0.0;
        const int nth2 = 12, nrr = 6;
        static const double gl_x[6] = {0.03376524, 0.16939531, 0.38069041,
                                       0.61930959, 0.83060469, 0.96623476};
        static const double gl_w[6] = {0.08566225, 0.18038079, 0.23395697,
                                       0.23395697, 0.18038079, 0.08566225};
        double out = 0.0;
        for (int it = 0; it < nth2; ++it) {
            double th = (it + 0.5) * (pi / 2) / nth2;
            double dth = (pi / 2) / nth2;
            double rmax = std::min(wx / std::cos(th), wy / std::sin(th));
            for (int ir = 0; ir < nrr; ++ir) {
                double r = gl_x[ir] * rmax;
                cplx dz(sx * r * std::cos(th), sy * r * std::sin(th));
                Point p{psing.chart, psing.z + dz};
                out += eval_at(p) * r * (gl_w[ir] * rmax) * dth;
            }
        }
        return out;
    };

    for (int side = 0; side < 2; ++side) {
        const Point& c = side == 0 ? xc : yc;
        int ci, cj;
        cell_center_index(c, ci, cj);
        for (int di = -reach; di <= reach; ++di)
            for (int dj = -reach; dj <= reach; ++dj) {
                int ii = ci + di, jj = cj + dj;
                if (torus) {
                    ii = (ii % n + n) % n;
                    jj = (jj % n + n) % n;
                } else if (ii < 0 || ii >= n || jj < 0 || jj >= n)
                    continue;
                std::size_t idx = s.index(c.chart, ii, jj);
                Point pc = s.point(idx);
                if (!in_patch(pc)) continue;
                bool other_side_cell = false;
                {
                    // a cell belongs to the nearer point to avoid double work
                    const Point& o = side == 0 ? yc : xc;
                    if (s.distance(pc, o) < s.distance(pc, c) ||
                        (side == 1 && s.distance(pc, o) == s.distance(pc, c)))
                        other_side_cell = true;
                }
                if (other_side_cell) continue;
                if (w[idx] == 0.0 && !torus) continue;
                // chart displacement from the cell center to the point
                cplx disp = c.z - pc.z;
                if (torus)
                    disp = cplx(disp.real() - std::round(disp.real()),
                                disp.imag() - std::round(disp.imag()));
                bool contains_sing = pc.chart == c.chart &&
                                     std::abs(disp.real()) <= 0.5 * h + 1e-15 &&
                                     std::abs(disp.imag()) <= 0.5 * h + 1e-15;
                if (contains_sing) {
                    // 4 corner rectangles around the singular point; the cell
                    // box relative to the point (disp = c - pc)
                    double wxp = 0.5 * h - disp.real(),
                           wxm = 0.5 * h + disp.real();
                    double wyp = 0.5 * h - disp.imag(),
                           wym = 0.5 * h + disp.imag();
                    Point psing{c.chart, c.z};
                    acc += corner_polar(psing, +1, wxp, +1, wyp);
                    acc += corner_polar(psing, -1, wxm, +1, wyp);
                    acc += corner_polar(psing, +1, wxp, -1, wym);
                    acc += corner_polar(psing, -1, wxm, -1, wym);
                } else {
                    const int sub = 8;
                    double hs = h / sub;
                    double cellacc = 0.0;
                    for (int a = 0; a < sub; ++a)
                        for (int bb = 0; bb < sub; ++bb) {
                            cplx z = pc.z + cplx((a + 0.5) * hs - 0.5 * h,
                                                 (bb + 0.5) * hs - 0.5 * h);
                            cellacc += eval_at({pc.chart, z});
                        }
                    double pou = torus ? 1.0
                                       : w[idx] / (std::exp(s.sigma()[idx]) *
                                                   h * h);
                    acc += cellacc * hs * hs * pou;
                }
            }
    }
    return acc;
}

namespace {
// first-order Laplacian perturbation for the inverse-metric tensor f on the
// flat torus: Ldot u = dx(fxx ux + fxy uy) + dy(fxy ux + fyy uy)
std::vector<double> ldot_apply(const Surface& s, const TensorField2& f,
                               const std::vector<double>& u) {
    int n = s.n();
    auto d = [&](const std::vector<double>& g, bool ydir) {
        std::vector<cplx> spec(std::size_t(n) * n);
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = g[i];
        fft2_inplace(spec.data(), n, -1);
        double norm = 1.0 / (double(n) * n);
        for (int i = 0; i < n; ++i) {
            int ky = fft_freq(i, n);
            for (int j = 0; j < n; ++j) {
                int kx = fft_freq(j, n);
                double k = ydir ? ky : kx;
                cplx mult(0.0, two_pi * k);
                if (i == n / 2 || j == n / 2) mult = 0.0;
                spec[std::size_t(i) * n + j] *= mult * norm;
            }
        }
        fft2_inplace(spec.data(), n, +1);
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real();
        return out;
    };
    auto ux = d(u, false), uy = d(u, true);
    std::vector<double> a(u.size()), c(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        double fxx = 0.5 * f.f_zz_up[i].real() + 0.5 * f.f_zzbar_up[i];
        double fyy = -0.5 * f.f_zz_up[i].real() + 0.5 * f.f_zzbar_up[i];
        double fxy = 0.5 * f.f_zz_up[i].imag();
        a[i] = fxx * ux[i] + fxy * uy[i];
        c[i] = fxy * ux[i] + fyy * uy[i];
    }
    auto da = d(a, false), dc = d(c, true);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i];
    return da;
}

std::vector<double> apply_R(const SpectralBasis& b,
                            const std::vector<double>& w) {
    std::vector<double> c = b.project(w);
    for (int n = 0; n < b.num_modes(); ++n) c[n] *= two_pi / b.lambda(n);
    return b.synthesize(c);
}
}  // namespace

double green_second_variation(const SpectralBasis& b, const TensorField2& f1,
                              const TensorField2& f2, const Point& x,
                              const Point& y) {
    // Both Ldot's integrated by parts onto the kernels:
    //   (R Ldot1 R Ldot2 R)(x,y) =
    //     Int f1^{ab}(z1) dG(x,z1)_a d d G(z1,z2)_{b c} f2^{cd}(z2) dG(z2,y)_d
    // with every kernel the exact continuum Green function. Disjoint supports
    // keep the middle kernel away from its diagonal.
    const Surface& s = b.surface();
    if (s.kind() != SurfaceKind::Torus)
        throw ConfigError("green_second_variation: torus only");
    const auto& w = s.weights();
    std::size_t sz = s.grid_size();
    const int n = s.n();

    // translation-invariant kernels tabulated on the displacement grid
    Point origin{0, cplx(0.0, 0.0)};
    std::vector<cplx> dG_tab(sz), d2G_tab(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        Point p = s.point(i);
        if (i == 0) {
            dG_tab[i] = d2G_tab[i] = 0.0;  // diagonal never used
            continue;
        }
        dG_tab[i] = green_exact_dz(s, p, origin);
        d2G_tab[i] = green_exact_dz2(s, p, origin);
    }
    auto idx_of = [&](const Point& p) {
        int j = (int(std::lround(p.z.real() * n)) % n + n) % n;
        int i = (int(std::lround(p.z.imag() * n)) % n + n) % n;
        return std::size_t(i) * n + j;
    };
    auto tab_at = [&](const std::vector<cplx>& tab, std::size_t i1,
                      std::size_t i2) {
        int r1 = int(i1) / n, c1 = int(i1) % n;
        int r2 = int(i2) / n, c2 = int(i2) % n;
        int dr = (r1 - r2 + n) % n, dc = (c1 - c2 + n) % n;
        return tab[std::size_t(dr) * n + dc];
    };
    std::size_t xi = idx_of(x), yi = idx_of(y);

    struct Cell {
        std::size_t idx;
        cplx fw;  // f^{zz} times quadrature weight
        cplx dG;  // d/dz G(p, endpoint)
    };
    auto collect = [&](const TensorField2& f, std::size_t end_idx) {
        std::vector<Cell> cells;
        for (std::size_t i = 0; i < sz; ++i) {
            if (std::abs(f.f_zz_up[i]) < 1e-300) continue;
            cells.push_back({i, w[i] * f.f_zz_up[i], tab_at(dG_tab, i, end_idx)});
        }
        return cells;
    };

    auto chain = [&](const TensorField2& fa, const TensorField2& fb) {
        auto ca = collect(fa, xi);  // carries dG(z1, x)
        auto cb = collect(fb, yi);  // carries dG(z2, y)
        cplx sum_a(0, 0), sum_b(0, 0);
        for (const auto& A : ca) sum_a += A.fw * A.dG;
        for (const auto& B : cb) sum_b += B.fw * B.dG;
        // separable dz dzbar block of the middle kernel: constant -pi/2
        double acc = 2.0 * ((-pi / 2.0) * sum_a * std::conj(sum_b)).real();
        // dz dz block: M_zz(z1,z2) = -d^2 G(z1,z2)
        for (const auto& A : ca) {
            cplx pa = A.fw * A.dG;
            cplx inner(0, 0);
            for (const auto& B : cb)
                inner += tab_at(d2G_tab, A.idx, B.idx) * B.fw * B.dG;
            acc += 2.0 * (pa * (-inner)).real();
        }
        return acc;
    };
    return (chain(f1, f2) + chain(f2, f1)) / (4.0 * pi * pi);
}

double circle_averaged_green(const SpectralBasis& b, const Point& x,
                             const Point& y, double delta) {
    const Surface& s = b.surface();
    if (delta < 2.0 * s.spacing())
        throw ResolutionError("circle_averaged_green: delta below resolution");
    if (s.kind() == SurfaceKind::Torus) {
        double dx = x.z.real() - y.z.real();
        double dy = x.z.imag() - y.z.imag();
        int L = b.cutoff();
        double acc = 0.0;
        for (int ky = -L; ky <= L; ++ky)
            for (int kx = -L; kx <= L; ++kx) {
                double k2 = double(kx) * kx + double(ky) * ky;
                if (k2 == 0.0 || k2 > double(L) * L) continue;
                double j0 =
                    std::cyl_bessel_j(0.0, two_pi * std::sqrt(k2) * delta);
                acc += j0 * j0 * std::cos(two_pi * (kx * dx + ky * dy)) / k2;
            }
        return acc / two_pi;
    }
    std::vector<double> pld(b.cutoff() + 1);
    detail::legendre_pl(b.cutoff(), std::cos(delta), pld.data());
    for (int l = 0; l <= b.cutoff(); ++l) pld[l] = pld[l] * pld[l];
    return zonal_green(b.cutoff(), std::cos(s.distance(x, y)), pld.data());
}

double circle_variance(const SpectralBasis& b, double delta) {
    // memoized: the diagonal is position independent on the base metrics
    struct Key {
        int kind, cutoff;
        double delta;
        bool operator==(const Key& o) const {
            return kind == o.kind && cutoff == o.cutoff && delta == o.delta;
        }
    };
    thread_local std::vector<std::pair<Key, double>> memo;
    Key key{int(b.surface().kind()), b.cutoff(), delta};
    for (const auto& kv : memo)
        if (kv.first == key) return kv.second;
    Point o{0, cplx(0.25, 0.25)};
    if (b.surface().kind() == SurfaceKind::Sphere) o = Point{0, cplx(0.2, 0.0)};
    double v = circle_averaged_green(b, o, o, delta);
    if (memo.size() > 64) memo.clear();
    memo.emplace_back(key, v);
    return v;
}

WeylFactor make_weyl_fourier(const Surface& s,
                             const std::vector<FourierMode>& modes) {
    if (s.kind() != SurfaceKind::Torus)
        throw ConfigError("make_weyl_fourier: torus surfaces only");
    WeylFactor w;
    std::size_t sz = s.grid_size();
    w.omega.assign(sz, 0.0);
    w.grad_z = std::vector<cplx>(sz, cplx(0, 0));
    w.lap_g = std::vector<double>(sz, 0.0);
    int band = 0;
    for (const auto& m : modes)
        band = std::max({band, std::abs(m.kx), std::abs(m.ky)});
    w.band = band;
    for (std::size_t i = 0; i < sz; ++i) {
        Point p = s.point(i);
        for (const auto& m : modes) {
            double th = two_pi * (m.kx * p.z.real() + m.ky * p.z.imag());
            double c = std::cos(th), sn = std::sin(th);
            double val = m.amp_cos * c + m.amp_sin * sn;
            w.omega[i] += val;
            cplx kbar(m.kx, -double(m.ky));
            (*w.grad_z)[i] += pi * kbar * (-m.amp_cos * sn + m.amp_sin * c);
            (*w.lap_g)[i] += -4.0 * pi * pi *
                             (double(m.kx) * m.kx + double(m.ky) * m.ky) * val;
        }
    }
    return w;
}

WeylFactor make_weyl_sphere(const Surface& s,
                            const std::vector<SphMode>& modes) {
    if (s.kind() != SurfaceKind::Sphere)
        throw ConfigError("make_weyl_sphere: sphere surfaces only");
    int L = 2;
    for (const auto& m : modes) L = std::max(L, m.l);
    SpectralBasis b = SpectralBasis::build(s, L);
    std::vector<double> coeff(b.num_modes(), 0.0);
    for (const auto& m : modes)
        for (int n = 0; n < b.num_modes(); ++n) {
            const auto& id = b.modes()[n];
            if (id.a == m.l && id.b == m.m)
                coeff[n] += id.is_sin ? m.amp_sin : m.amp_cos;
        }
    WeylFactor w;
    std::size_t sz = s.grid_size();
    w.band = L;
    w.omega.assign(sz, 0.0);
    w.grad_z = std::vector<cplx>(sz, cplx(0, 0));
    w.lap_g = std::vector<double>(sz, 0.0);
    std::vector<double> evals(b.num_modes());
    std::vector<cplx> d1(b.num_modes()), d2(b.num_modes());
    for (std::size_t i = 0; i < sz; ++i) {
        Point p = s.point(i);
        b.eval_all(p, evals.data());
        b.eval_derivs(p, d1.data(), d2.data());
        double v = 0.0, lap = 0.0;
        cplx g(0, 0);
        for (int n = 0; n < b.num_modes(); ++n) {
            if (coeff[n] == 0.0) continue;
            v += coeff[n] * evals[n];
            g += coeff[n] * d1[n];
            lap += -b.lambda(n) * coeff[n] * evals[n];
        }
        w.omega[i] = v;
        (*w.grad_z)[i] = g;
        (*w.lap_g)[i] = lap;
    }
    return w;
}

TensorField2 make_tensor_fourier(const Surface& s,
                                 const std::vector<TensorMode>& modes,
                                 const std::vector<double>& trace) {
    TensorField2 f = TensorField2::zero(s);
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        Point p = s.point(i);
        for (const auto& m : modes)
            f.f_zz_up[i] +=
                m.amp * std::exp(cplx(0, two_pi) * (double(m.kx) * p.z.real() +
                                                    double(m.ky) * p.z.imag()));
    }
    if (!trace.empty()) {
        const auto& sig = s.sigma();
        for (std::size_t i = 0; i < s.grid_size(); ++i)
            f.f_zzbar_up[i] = std::exp(-sig[i]) * trace[i];
    }
    return f;
}

// --- FDM oracle -------------------------------------------------------------

MetricEval flat_metric() {
    return [](double, double) { return MetricSample{}; };
}

MetricEval perturbed_metric(
    const std::function<void(double, double, cplx&, double&)>& f_zz_and_trace,
    double eps) {
    return [f_zz_and_trace, eps](double x, double y) {
        cplx fzz;
        double tr;
        f_zz_and_trace(x, y, fzz, tr);
        double fxx = 0.5 * fzz.real() + 0.5 * tr;
        double fyy = -0.5 * fzz.real() + 0.5 * tr;
        double fxy = 0.5 * fzz.imag();
        MetricSample ms;
        ms.gxx = 1.0 + eps * fxx;
        ms.gxy = eps * fxy;
        ms.gyy = 1.0 + eps * fyy;
        double det_inv = ms.gxx * ms.gyy - ms.gxy * ms.gxy;
        ms.sqrtdet = 1.0 / std::sqrt(det_inv);
        return ms;
    };
}

MetricEval conformal_metric(
    const std::function<double(double, double)>& omega) {
    return [omega](double x, double y) {
        double w = omega(x, y);
        MetricSample ms;
        ms.gxx = ms.gyy = std::exp(-w);
        ms.gxy = 0.0;
        ms.sqrtdet = std::exp(w);
        return ms;
    };
}

namespace {
std::array<double, 10> element_stiffness(const MetricEval& metric, int ix,
                                         int iy, double h, double* mwork) {
    const double ga = 0.5 - 0.5 / std::sqrt(3.0), gb = 1.0 - ga;
    const double gx4[4] = {ga, gb, ga, gb};
    const double gy4[4] = {ga, ga, gb, gb};
    std::array<double, 10> K{};
    for (int a = 0; a < 4; ++a) mwork[a] = 0.0;
    for (int gp = 0; gp < 4; ++gp) {
        double xi = gx4[gp], eta = gy4[gp];
        double px = (ix + xi) * h, py = (iy + eta) * h;
        MetricSample ms = metric(px, py);
        double dNx[4] = {-(1 - eta) / h, (1 - eta) / h, -eta / h, eta / h};
        double dNy[4] = {-(1 - xi) / h, -xi / h, (1 - xi) / h, xi / h};
        double Nv[4] = {(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta,
                        xi * eta};
        double wq = h * h / 4.0 * ms.sqrtdet;
        int idx = 0;
        for (int a = 0; a < 4; ++a) {
            for (int c = a; c < 4; ++c) {
                double v = ms.gxx * dNx[a] * dNx[c] +
                           ms.gxy * (dNx[a] * dNy[c] + dNy[a] * dNx[c]) +
                           ms.gyy * dNy[a] * dNy[c];
                K[idx++] += wq * v;
            }
            mwork[a] += wq * Nv[a];
        }
    }
    return K;
}
}  // namespace

FdmGreenOracle::FdmGreenOracle(int n, const MetricEval& metric) : n_(n) {
    if (!is_pow2(n)) throw ConfigError("fdm oracle: n must be a power of two");
    double h = 1.0 / n;
    std::size_t nn = std::size_t(n) * n;
    elem_.resize(nn);
    mu_.assign(nn, 0.0);
    double mwork[4];
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            elem_[std::size_t(iy) * n + ix] =
                element_stiffness(metric, ix, iy, h, mwork);
            int ix1 = (ix + 1) % n, iy1 = (iy + 1) % n;
            std::size_t nd[4] = {
                std::size_t(iy) * n + ix, std::size_t(iy) * n + ix1,
                std::size_t(iy1) * n + ix, std::size_t(iy1) * n + ix1};
            for (int a = 0; a < 4; ++a) mu_[nd[a]] += mwork[a];
        }
    vol_ = 0.0;
    for (double m : mu_) vol_ += m;

    // flat-stiffness FFT symbol for preconditioning
    std::vector<std::array<double, 10>> saved = std::move(elem_);
    elem_.assign(nn, element_stiffness(flat_metric(), 0, 0, h, mwork));
    std::vector<double> delta(nn, 0.0), Ad(nn);
    delta[0] = 1.0;
    apply(delta, Ad);
    std::vector<cplx> spec(nn);
    for (std::size_t i = 0; i < nn; ++i) spec[i] = Ad[i];
    fft2_inplace(spec.data(), n, -1);
    flat_symbol_.resize(nn);
    for (std::size_t i = 0; i < nn; ++i)
        flat_symbol_[i] = std::max(spec[i].real(), 1e-300);
    elem_ = std::move(saved);
}

void FdmGreenOracle::apply(const std::vector<double>& u,
                           std::vector<double>& out) const {
    int n = n_;
    out.assign(u.size(), 0.0);
    for (int iy = 0; iy < n; ++iy) {
        int iy1 = (iy + 1) % n;
        for (int ix = 0; ix < n; ++ix) {
            int ix1 = (ix + 1) % n;
            const auto& K = elem_[std::size_t(iy) * n + ix];
            std::size_t nd[4] = {
                std::size_t(iy) * n + ix, std::size_t(iy) * n + ix1,
                std::size_t(iy1) * n + ix, std::size_t(iy1) * n + ix1};
            double u0 = u[nd[0]], u1 = u[nd[1]], u2 = u[nd[2]], u3 = u[nd[3]];
            out[nd[0]] += K[0] * u0 + K[1] * u1 + K[2] * u2 + K[3] * u3;
            out[nd[1]] += K[1] * u0 + K[4] * u1 + K[5] * u2 + K[6] * u3;
            out[nd[2]] += K[2] * u0 + K[5] * u1 + K[7] * u2 + K[8] * u3;
            out[nd[3]] += K[3] * u0 + K[6] * u1 + K[8] * u2 + K[9] * u3;
        }
    }
}

std::vector<double> FdmGreenOracle::solve(std::vector<double> rhs) const {
    int n = n_;
    std::size_t nn = rhs.size();
    auto precond = [&](const std::vector<double>& r) {
        std::vector<cplx> spec(nn);
        for (std::size_t i = 0; i < nn; ++i) spec[i] = r[i];
        fft2_inplace(spec.data(), n, -1);
        spec[0] = 0.0;
        for (std::size_t i = 1; i < nn; ++i) spec[i] /= flat_symbol_[i];
        ifft2_normalized(spec.data(), n);
        std::vector<double> out(nn);
        for (std::size_t i = 0; i < nn; ++i) out[i] = spec[i].real();
        return out;
    };
    double mean = 0.0;
    for (double v : rhs) mean += v;
    mean /= double(nn);
    for (double& v : rhs) v -= mean;

    std::vector<double> x(nn, 0.0), r = rhs, z = precond(r), p = z, Ap(nn);
    double rz = simd::active().dot(r.data(), z.data(), nn);
    double b2 = std::sqrt(simd::active().dot(rhs.data(), rhs.data(), nn));
    double tol = 1e-10 * std::max(1.0, b2);
    bool converged = false;
    for (int it = 0; it < 4000; ++it) {
        apply(p, Ap);
        double pAp = simd::active().dot(p.data(), Ap.data(), nn);
        double alpha = rz / pAp;
        simd::active().axpy(alpha, p.data(), x.data(), nn);
        simd::active().axpy(-alpha, Ap.data(), r.data(), nn);
        double r2 = std::sqrt(simd::active().dot(r.data(), r.data(), nn));
        if (r2 < tol) {
            converged = true;
            break;
        }
        z = precond(r);
        double rz_new = simd::active().dot(r.data(), z.data(), nn);
        double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < nn; ++i) p[i] = z[i] + beta * p[i];
    }
    if (!converged)
        throw ComputeError("fdm oracle: CG failed to reach residual 1e-10");
    double num = simd::active().dot(mu_.data(), x.data(), nn);
    double shift = num / vol_;
    for (double& v : x) v -= shift;
    return x;
}

const std::vector<double>& FdmGreenOracle::green_column(int jx, int jy) const {
    long key = long(jy) * n_ + jx;
    if (key == cache_key_) return col_;
    std::size_t nn = std::size_t(n_) * n_;
    std::vector<double> rhs(nn);
    std::size_t ysrc = std::size_t(jy) * n_ + jx;
    for (std::size_t i = 0; i < nn; ++i)
        rhs[i] = two_pi * ((i == ysrc ? 1.0 : 0.0) - mu_[i] / vol_);
    col_ = solve(std::move(rhs));
    cache_key_ = key;
    return col_;
}

double FdmGreenOracle::green(int jx1, int jy1, int jx2, int jy2) const {
    const auto& col = green_column(jx2, jy2);
    return col[std::size_t(jy1) * n_ + jx1];
}

}  // namespace llab::spectral
