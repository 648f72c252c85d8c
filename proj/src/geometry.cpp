#include "llab/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "llab/fft.hpp"
#include "llab/simd.hpp"

namespace llab::geometry {

namespace {
constexpr double kChartEdge = 1.4;  // PoU support edge; chart box = edge

double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
}  // namespace

double chart_cutoff_edge() { return kChartEdge; }

double chart_cutoff(double r) {
    // chi(r) = psi(ln r) with psi(u) + psi(-u) = 1
    const double a = std::log(kChartEdge);
    if (r <= 0.0) return 1.0;
    double u = std::log(r);
    if (u <= -a) return 1.0;
    if (u >= a) return 0.0;
    double f1 = bump((a - u) / (2 * a));
    double f2 = bump((a + u) / (2 * a));
    return f1 / (f1 + f2);
}

Surface Surface::make(SurfaceKind kind, int n) {
    if (n < 16 || !is_pow2(n))
        throw ConfigError("make_surface: grid size must be a power of two >= 16");
    Surface s;
    s.kind_ = kind;
    s.n_ = n;
    std::size_t sz = std::size_t(kind == SurfaceKind::Sphere ? 2 : 1) * n * n;
    s.sigma_.resize(sz);
    s.weights_.resize(sz);
    s.curvature_.resize(sz);
    if (kind == SurfaceKind::Torus) {
        s.box_ = 0.5;
        s.h_ = 1.0 / n;
        double w = 1.0 / (double(n) * n);
        std::fill(s.sigma_.begin(), s.sigma_.end(), 0.0);
        std::fill(s.weights_.begin(), s.weights_.end(), w);
        std::fill(s.curvature_.begin(), s.curvature_.end(), 0.0);
    } else {
        s.box_ = kChartEdge;
        s.h_ = 2.0 * kChartEdge / n;
        for (std::size_t idx = 0; idx < sz; ++idx) {
            Point p = s.point(idx);
            double r = std::abs(p.z);
            double sig = std::log(4.0) - 2.0 * std::log1p(r * r);
            s.sigma_[idx] = sig;
            s.weights_[idx] = chart_cutoff(r) * std::exp(sig) * s.h_ * s.h_;
            s.curvature_[idx] = 2.0;
        }
    }
    std::vector<double> ones(sz, 1.0);
    s.volume_ = s.integrate(ones);
    return s;
}

Point Surface::point(std::size_t idx) const {
    int nn = n_ * n_;
    int chart = int(idx / nn);
    int rem = int(idx % nn);
    int i = rem / n_, j = rem % n_;
    if (kind_ == SurfaceKind::Torus)
        return {0, cplx(double(j) / n_, double(i) / n_)};
    double x = -box_ + (j + 0.5) * h_;
    double y = -box_ + (i + 0.5) * h_;
    return {chart, cplx(x, y)};
}

double Surface::sigma_at(const Point& p) const {
    if (kind_ == SurfaceKind::Torus) return 0.0;
    double r2 = std::norm(p.z);
    return std::log(4.0) - 2.0 * std::log1p(r2);
}

double Surface::integrate(const std::vector<double>& f) const {
    return simd::active().dot(weights_.data(), f.data(), f.size());
}

std::array<double, 3> Surface::embed(const Point& p) const {
    if (kind_ == SurfaceKind::Torus)
        return {p.z.real(), p.z.imag(), 0.0};
    // stereographic: |z| = tan(theta/2), phi = arg z; chart 1 via z = 1/w
    cplx z = p.z;
    if (p.chart == 1) {
        if (std::abs(z) < 1e-300) return {0.0, 0.0, -1.0};
        z = 1.0 / z;
    }
    double r2 = std::norm(z);
    double denom = 1.0 + r2;
    double st = 2.0 / denom;  // sin(theta)/|z| * |z| handled below
    return {st * z.real(), st * z.imag(), (1.0 - r2) / denom};
}

double Surface::distance(const Point& a, const Point& b) const {
    if (kind_ == SurfaceKind::Torus) {
        double dx = a.z.real() - b.z.real();
        double dy = a.z.imag() - b.z.imag();
        dx -= std::round(dx);
        dy -= std::round(dy);
        return std::sqrt(dx * dx + dy * dy);
    }
    auto u = embed(a), v = embed(b);
    double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    return std::acos(std::clamp(dot, -1.0, 1.0));
}

Point Surface::canonical(const Point& p) const {
    if (kind_ == SurfaceKind::Torus) {
        double x = p.z.real() - std::floor(p.z.real());
        double y = p.z.imag() - std::floor(p.z.imag());
        return {0, cplx(x, y)};
    }
    if (std::abs(p.z) <= 1.0) return p;
    return {1 - p.chart, 1.0 / p.z};
}

std::string Surface::header() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "surface %s n %d box %.17g",
                  kind_ == SurfaceKind::Sphere ? "sphere" : "torus", n_, box_);
    return buf;
}

Surface make_surface(SurfaceKind kind, int n) { return Surface::make(kind, n); }

TensorField2 TensorField2::zero(const Surface& s) {
    TensorField2 f;
    f.f_zz_up.assign(s.grid_size(), cplx(0.0, 0.0));
    f.f_zzbar_up.assign(s.grid_size(), 0.0);
    return f;
}

std::vector<double> TensorField2::trace_g(const Surface& s) const {
    std::vector<double> tr(f_zzbar_up.size());
    const auto& sig = s.sigma();
    for (std::size_t i = 0; i < tr.size(); ++i)
        tr[i] = std::exp(sig[i]) * f_zzbar_up[i];
    return tr;
}

TraceSplit split_trace(const Surface& s, const TensorField2& f) {
    TraceSplit out;
    out.traceless = TensorField2::zero(s);
    out.trace_part = TensorField2::zero(s);
    out.traceless.f_zz_up = f.f_zz_up;
    out.trace_part.f_zzbar_up = f.f_zzbar_up;
    return out;
}

WeylFactor WeylFactor::constant(const Surface& s, double c) {
    WeylFactor w;
    w.omega.assign(s.grid_size(), c);
    w.band = 0;
    w.grad_z = std::vector<cplx>(s.grid_size(), cplx(0.0, 0.0));
    w.lap_g = std::vector<double>(s.grid_size(), 0.0);
    return w;
}

namespace {

// chart d/dz of a real grid field: spectral on the torus, 4th-order central
// differences on sphere charts.
std::vector<cplx> chart_grad(const Surface& s, const std::vector<double>& f) {
    int n = s.n();
    std::vector<cplx> g(s.grid_size());
    if (s.kind() == SurfaceKind::Torus) {
        std::vector<cplx> spec(std::size_t(n) * n);
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = f[i];
        fft2_inplace(spec.data(), n, -1);
        double norm = 1.0 / (double(n) * n);
        for (int i = 0; i < n; ++i) {
            int ky = fft_freq(i, n);
            for (int j = 0; j < n; ++j) {
                int kx = fft_freq(j, n);
                // d/dz e^{2pi i k.x} = pi i (kx - i ky) e^{...}
                cplx mult = cplx(0.0, pi) * cplx(kx, -ky);
                if (i == n / 2 || j == n / 2) mult = 0.0;  // drop Nyquist
                spec[std::size_t(i) * n + j] *= mult * norm;
            }
        }
        fft2_inplace(spec.data(), n, +1);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = spec[i];
        return g;
    }
    double h = s.spacing();
    auto at = [&](int c, int i, int j) -> double {
        i = std::clamp(i, 0, n - 1);
        j = std::clamp(j, 0, n - 1);
        return f[s.index(c, i, j)];
    };
    for (int c = 0; c < s.charts(); ++c)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double fx = (-at(c, i, j + 2) + 8 * at(c, i, j + 1) -
                             8 * at(c, i, j - 1) + at(c, i, j - 2)) /
                            (12 * h);
                double fy = (-at(c, i + 2, j) + 8 * at(c, i + 1, j) -
                             8 * at(c, i - 1, j) + at(c, i - 2, j)) /
                            (12 * h);
                g[s.index(c, i, j)] = 0.5 * cplx(fx, -fy);
            }
    return g;
}

// flat chart Laplacian
std::vector<double> chart_lap(const Surface& s, const std::vector<double>& f) {
    int n = s.n();
    std::vector<double> out(s.grid_size());
    if (s.kind() == SurfaceKind::Torus) {
        std::vector<cplx> spec(std::size_t(n) * n);
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = f[i];
        fft2_inplace(spec.data(), n, -1);
        double norm = 1.0 / (double(n) * n);
        for (int i = 0; i < n; ++i) {
            int ky = fft_freq(i, n);
            for (int j = 0; j < n; ++j) {
                int kx = fft_freq(j, n);
                double mult = -4.0 * pi * pi * (double(kx) * kx + double(ky) * ky);
                spec[std::size_t(i) * n + j] *= mult * norm;
            }
        }
        fft2_inplace(spec.data(), n, +1);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec[i].real();
        return out;
    }
    double h2 = s.spacing() * s.spacing();
    auto at = [&](int c, int i, int j) -> double {
        i = std::clamp(i, 0, n - 1);
        j = std::clamp(j, 0, n - 1);
        return f[s.index(c, i, j)];
    };
    for (int c = 0; c < s.charts(); ++c)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double lap =
                    (-at(c, i, j + 2) + 16 * at(c, i, j + 1) - 30 * at(c, i, j) +
                     16 * at(c, i, j - 1) - at(c, i, j - 2)) /
                        (12 * h2) +
                    (-at(c, i + 2, j) + 16 * at(c, i + 1, j) - 30 * at(c, i, j) +
                     16 * at(c, i - 1, j) - at(c, i - 2, j)) /
                        (12 * h2);
                out[s.index(c, i, j)] = lap;
            }
    return out;
}

}  // namespace

double anomaly_functional(const WeylFactor& omega, const Surface& s) {
    if (omega.omega.size() != s.grid_size())
        throw ConfigError("anomaly_functional: field not on this grid");
    std::vector<cplx> grad =
        omega.grad_z ? *omega.grad_z : chart_grad(s, omega.omega);
    // |d omega|^2_g dv_g = 4 |d/dz omega|^2 d^2z  (conformally invariant)
    const auto& w = s.weights();
    const auto& sig = s.sigma();
    const auto& K = s.curvature();
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double dz2 = w[i] * std::exp(-sig[i]) * 4.0 * std::norm(grad[i]);
        acc += 0.5 * dz2 + K[i] * omega.omega[i] * w[i];
    }
    return acc / (48.0 * pi);
}

void Surface::set_arrays(std::vector<double> sigma, std::vector<double> weights,
                         std::vector<double> curvature) {
    sigma_ = std::move(sigma);
    weights_ = std::move(weights);
    curvature_ = std::move(curvature);
    std::vector<double> ones(grid_size(), 1.0);
    volume_ = integrate(ones);
}

Surface weyl_transform(const Surface& s, const WeylFactor& omega) {
    if (omega.omega.size() != s.grid_size())
        throw ConfigError("weyl_transform: field not on this grid");
    Surface t = s;
    std::vector<double> lap =
        omega.lap_g ? *omega.lap_g : std::vector<double>();
    if (lap.empty()) {
        // Delta_g omega = e^{-sigma} * flat Laplacian
        lap = chart_lap(s, omega.omega);
        for (std::size_t i = 0; i < lap.size(); ++i)
            lap[i] *= std::exp(-s.sigma()[i]);
    }
    std::vector<double> sigma(s.grid_size()), weights(s.grid_size()),
        curv(s.grid_size());
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        sigma[i] = s.sigma()[i] + omega.omega[i];
        weights[i] = s.weights()[i] * std::exp(omega.omega[i]);
        curv[i] = std::exp(-omega.omega[i]) * (s.curvature()[i] - lap[i]);
    }
    t.set_arrays(std::move(sigma), std::move(weights), std::move(curv));
    return t;
}

std::vector<double> curvature_variation(const Surface& s,
                                        const TensorField2& f) {
    // inverse-metric perturbation; lower components
    //   F_zz = -(e^{2 sigma}/4) conj(f^{zz}),  tr(f_low) = -tr_up
    const auto& sig = s.sigma();
    std::size_t sz = s.grid_size();
    std::vector<double> tr_up = f.trace_g(s);
    // traceless lower part, complex field
    std::vector<double> Fre(sz), Fim(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        cplx F = -std::exp(2.0 * sig[i]) / 4.0 * std::conj(f.f_zz_up[i]);
        Fre[i] = F.real();
        Fim[i] = F.imag();
    }
    // divdiv = 2 Re[ 4 e^{-2 sigma} (d/dzbar - (d/dzbar sigma)) d/dzbar F_zz ]
    // chart derivatives: d/dzbar X = conj(d/dz conj(X)) for complex X
    auto dzbar = [&](const std::vector<double>& re,
                     const std::vector<double>& im) {
        // d/dzbar (re + i im) = conj(d/dz re) + i conj(d/dz im)
        std::vector<cplx> gre = chart_grad(s, re), gim = chart_grad(s, im);
        std::vector<cplx> out(sz);
        for (std::size_t i = 0; i < sz; ++i)
            out[i] = std::conj(gre[i]) + cplx(0, 1) * std::conj(gim[i]);
        return out;
    };
    std::vector<cplx> dF = dzbar(Fre, Fim);
    std::vector<double> dFre(sz), dFim(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        dFre[i] = dF[i].real();
        dFim[i] = dF[i].imag();
    }
    std::vector<cplx> ddF = dzbar(dFre, dFim);
    std::vector<cplx> dsig_z = chart_grad(s, sig);
    std::vector<double> lap_tr = chart_lap(s, tr_up);

    const auto& K = s.curvature();
    std::vector<double> out(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        cplx dzbar_sig = std::conj(dsig_z[i]);
        cplx inner = ddF[i] - dzbar_sig * dF[i];
        double divdiv_tf = 2.0 * (4.0 * std::exp(-2.0 * sig[i]) * inner).real();
        double lap_g_tr = std::exp(-sig[i]) * lap_tr[i];
        // With f_low = f_low^tf + (1/2)tr_low g, tr_low = -tr_up:
        //   dK = -K tr_low/2 + divdiv(f_low^tf) + (1/2)Lap tr_low - Lap tr_low
        //      = (1/2)K tr_up + divdiv(f_low^tf) + (1/2)Lap tr_up
        out[i] = 0.5 * K[i] * tr_up[i] + divdiv_tf + 0.5 * lap_g_tr;
    }
    return out;
}

DmSplit tensor_decompose(const Surface& s, const TensorField2& f,
                         bool allow_sphere) {
    if (s.kind() == SurfaceKind::Sphere) {
        if (!allow_sphere)
            throw DomainError(
                "tensor_decompose: sphere has no moduli sector (pass "
                "allow_sphere to get (f, 0))");
        return {f, TensorField2::zero(s)};
    }
    // flat torus: divergence-free traceless tensors are the constant modes
    DmSplit out{TensorField2::zero(s), TensorField2::zero(s)};
    const auto& w = s.weights();
    cplx mean(0, 0);
    double vol = 0;
    for (std::size_t i = 0; i < f.f_zz_up.size(); ++i) {
        mean += w[i] * f.f_zz_up[i];
        vol += w[i];
    }
    mean /= vol;
    for (std::size_t i = 0; i < f.f_zz_up.size(); ++i) {
        out.f_m.f_zz_up[i] = mean;
        out.f_d.f_zz_up[i] = f.f_zz_up[i] - mean;
    }
    return out;
}

double background_charge(double gamma) {
    if (!(gamma > 0.0 && gamma < 2.0))
        throw DomainError("gamma must lie in (0,2)");
    return 2.0 / gamma + gamma / 2.0;
}

double conformal_weight(double alpha, double gamma) {
    double Q = background_charge(gamma);
    return alpha / 2.0 * (Q - alpha / 2.0);
}

double tensor_inner(const Surface& s, const TensorField2& a,
                    const TensorField2& b) {
    // f1^{ab} f2_{ab} = (e^{2 sigma}/2) Re[f1^{zz} conj(f2^{zz})]
    //                 + (e^{2 sigma}/2) f1^{z zbar} f2^{z zbar}
    const auto& w = s.weights();
    const auto& sig = s.sigma();
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double e2s = std::exp(2.0 * sig[i]);
        double tt = 0.5 * e2s *
                    (a.f_zz_up[i] * std::conj(b.f_zz_up[i])).real();
        double tr = 0.5 * e2s * a.f_zzbar_up[i] * b.f_zzbar_up[i];
        acc += w[i] * (tt + tr);
    }
    return acc;
}

void write_csv_grid(const std::string& path, const Surface& s,
                    const std::vector<double>& field) {
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot open " + path);
    out << "# " << s.header() << "\n";
    out << "# row-major per chart; torus origin 0 spacing 1/n; sphere origin "
           "-box+h/2 spacing h\n";
    int n = s.n();
    for (int c = 0; c < s.charts(); ++c)
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                out << field[s.index(c, i, j)];
                out << (j + 1 == n ? '\n' : ',');
            }
        }
}

}  // namespace llab::geometry
