#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "llab/spectral.hpp"

using namespace llab;
using namespace llab::geometry;
using namespace llab::spectral;

namespace {

struct RandomTensor {
    struct M {
        int kx, ky;
        cplx a;
    };
    std::vector<M> modes;        // traceless part
    std::vector<M> trace_modes;  // trace part (a.real -> cos, a.imag -> sin)

    TensorField2 realize(const Surface& s) const {
        std::vector<TensorMode> tm;
        for (const auto& m : modes) tm.push_back({m.kx, m.ky, m.a});
        std::vector<double> trv;
        if (!trace_modes.empty()) {
            trv.assign(s.grid_size(), 0.0);
            for (std::size_t i = 0; i < s.grid_size(); ++i) {
                Point p = s.point(i);
                for (const auto& t : trace_modes) {
                    double th =
                        two_pi * (t.kx * p.z.real() + t.ky * p.z.imag());
                    trv[i] += t.a.real() * std::cos(th) +
                              t.a.imag() * std::sin(th);
                }
            }
        }
        return make_tensor_fourier(s, tm, trv);
    }
    void eval(double x, double y, cplx& fzz, double& tr) const {
        fzz = 0;
        tr = 0;
        for (const auto& m : modes)
            fzz += m.a * std::exp(cplx(0, two_pi) * (m.kx * x + m.ky * y));
        for (const auto& t : trace_modes) {
            double th = two_pi * (t.kx * x + t.ky * y);
            tr += t.a.real() * std::cos(th) + t.a.imag() * std::sin(th);
        }
    }
};

// central difference of the lattice-oracle Green, Richardson extrapolated in
// the lattice spacing so the oracle's own O(h^2) error stays below the
// comparison tolerance
double fd_oracle(const RandomTensor& rt, int x1, int y1, int x2, int y2,
                 double eps) {
    std::function<void(double, double, cplx&, double&)> fe =
        [&](double x, double y, cplx& fzz, double& tr) {
            rt.eval(x, y, fzz, tr);
        };
    auto fd_at = [&](int nfd) {
        int sc = nfd / 64;
        FdmGreenOracle op(nfd, perturbed_metric(fe, +eps));
        FdmGreenOracle om(nfd, perturbed_metric(fe, -eps));
        return (op.green(sc * x1, sc * y1, sc * x2, sc * y2) -
                om.green(sc * x1, sc * y1, sc * x2, sc * y2)) /
               (2 * eps);
    };
    double f64 = fd_at(64), f128 = fd_at(128);
    return (4.0 * f128 - f64) / 3.0;
}

}  // namespace

TEST_CASE("green variation vanishes for f = 0 and is linear in f") {
    auto s = make_surface(SurfaceKind::Torus, 128);
    auto b = SpectralBasis::build(s, 32);
    Point x{0, cplx(0.1, 0.2)}, y{0, cplx(0.7, 0.6)};
    CHECK(green_variation(b, TensorField2::zero(s), x, y) == 0.0);

    auto f1 = make_tensor_fourier(s, {{2, 1, cplx(0.8, -0.3)}});
    auto f2 = make_tensor_fourier(s, {{-1, 3, cplx(-0.2, 0.9)}});
    TensorField2 sum = TensorField2::zero(s);
    for (std::size_t i = 0; i < s.grid_size(); ++i)
        sum.f_zz_up[i] = f1.f_zz_up[i] + f2.f_zz_up[i];
    double v1 = green_variation(b, f1, x, y);
    double v2 = green_variation(b, f2, x, y);
    double vs = green_variation(b, sum, x, y);
    CHECK(std::abs(vs - v1 - v2) < 1e-10);
}

TEST_CASE("green variation rejects degenerate geometry") {
    auto s = make_surface(SurfaceKind::Torus, 128);
    auto b = SpectralBasis::build(s, 32);
    auto f = make_tensor_fourier(s, {{1, 0, cplx(1, 0)}});
    Point x{0, cplx(0.3, 0.3)};
    CHECK_THROWS_AS(green_variation(b, f, x, x), DomainError);
    Point close{0, cplx(0.3 + 2.0 / 128, 0.3)};
    CHECK_THROWS_AS(green_variation(b, f, x, close), DomainError);
}

TEST_CASE("gradient check against the independent lattice oracle") {
    // the module's central numerical claim: randomized (f, x, y), both pure
    // trace and traceless, relative error < 1e-3 at eps = 1e-3
    auto s = make_surface(SurfaceKind::Torus, 256);
    auto b = SpectralBasis::build(s, 64);
    std::mt19937 gen(77);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> K(-3, 3);
    std::uniform_int_distribution<int> P(0, 63);
    int done = 0;
    while (done < 5) {
        RandomTensor rt;
        bool trace_case = done % 2 == 1;
        for (int q = 0; q < 3; ++q) {
            if (trace_case)
                rt.trace_modes.push_back(
                    {K(gen), K(gen), cplx(U(gen), U(gen))});
            else
                rt.modes.push_back({K(gen), K(gen), cplx(U(gen), U(gen))});
        }
        int x1 = P(gen), y1 = P(gen), x2 = P(gen), y2 = P(gen);
        double dx = std::abs(x1 - x2) > 32 ? 64 - std::abs(x1 - x2) : x1 - x2;
        double dy = std::abs(y1 - y2) > 32 ? 64 - std::abs(y1 - y2) : y1 - y2;
        if (std::hypot(dx, dy) < 20) continue;
        auto f = rt.realize(s);
        Point x{0, cplx(x1 / 64.0, y1 / 64.0)};
        Point y{0, cplx(x2 / 64.0, y2 / 64.0)};
        double formula = green_variation(b, f, x, y);
        double fd = fd_oracle(rt, x1, y1, x2, y2, 1e-3);
        if (std::abs(fd) < 5e-3) continue;  // ill-conditioned relative compare
        CHECK(rel_err(formula, fd) < 1e-3);
        ++done;
    }
}

TEST_CASE("pure trace variation matches the weyl-formula derivative") {
    auto s = make_surface(SurfaceKind::Torus, 256);
    auto b = SpectralBasis::build(s, 64);
    std::vector<double> trv(s.grid_size());
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        Point p = s.point(i);
        trv[i] = 0.8 * std::cos(two_pi * p.z.real()) +
                 0.5 * std::sin(two_pi * (p.z.real() + 2 * p.z.imag()));
    }
    auto f = make_tensor_fourier(s, {}, trv);
    Point x{0, cplx(6 / 64.0, 13 / 64.0)}, y{0, cplx(45 / 64.0, 38 / 64.0)};
    double formula = green_variation(b, f, x, y);
    double eps = 1e-4;
    auto mkw = [&](double e) {
        return make_weyl_fourier(
            s, {{1, 0, -e * 0.8 / 2, 0.0}, {1, 2, 0.0, -e * 0.5 / 2}});
    };
    double route2 =
        (green_weyl(b, mkw(eps), x, y) - green_weyl(b, mkw(-eps), x, y)) /
        (2 * eps);
    CHECK(rel_err(formula, route2) < 1e-3);
}

TEST_CASE("sphere trace variation against the weyl-formula derivative") {
    auto s = make_surface(SurfaceKind::Sphere, 64);
    auto b = SpectralBasis::build(s, 32);
    auto w1 = make_weyl_sphere(s, {{1, 0, 0.6, 0.0}, {2, 1, 0.3, 0.2}});
    TensorField2 f = TensorField2::zero(s);
    const auto& sig = s.sigma();
    for (std::size_t i = 0; i < s.grid_size(); ++i)
        f.f_zzbar_up[i] = std::exp(-sig[i]) * w1.omega[i];
    Point x{0, cplx(0.25, 0.1)}, y{0, cplx(-0.4, 0.35)};
    double formula = green_variation(b, f, x, y);
    double eps = 1e-4;
    auto scale = [&](double e) {
        WeylFactor w = w1;
        for (auto& v : w.omega) v *= -e / 2;
        for (auto& v : *w.grad_z) v *= -e / 2;
        for (auto& v : *w.lap_g) v *= -e / 2;
        return w;
    };
    double route2 =
        (green_weyl(b, scale(eps), x, y) - green_weyl(b, scale(-eps), x, y)) /
        (2 * eps);
    CHECK(rel_err(formula, route2) < 5e-3);
}

TEST_CASE("second variation: composed kernels vs mixed finite differences") {
    auto s = make_surface(SurfaceKind::Torus, 256);
    auto b = SpectralBasis::build(s, 64);
    auto bump = [](double x, double y, double cx, double cy, double w) {
        double dx = x - cx, dy = y - cy;
        dx -= std::round(dx);
        dy -= std::round(dy);
        double r2 = (dx * dx + dy * dy) / (w * w);
        return r2 < 1.0 ? std::exp(-2.0 / (1.0 - r2) -
                                   1.0 / ((1.0 - r2) * (1.0 - r2))) *
                              std::exp(3.0)
                        : 0.0;
    };
    auto f1e = [&](double x, double y) {
        return cplx(1.0, 0.4) * bump(x, y, 0.18, 0.22, 0.16);
    };
    auto f2e = [&](double x, double y) {
        return cplx(-0.7, 0.9) * bump(x, y, 0.70, 0.62, 0.16);
    };
    TensorField2 f1 = TensorField2::zero(s), f2 = TensorField2::zero(s);
    for (std::size_t i = 0; i < s.grid_size(); ++i) {
        Point p = s.point(i);
        f1.f_zz_up[i] = f1e(p.z.real(), p.z.imag());
        f2.f_zz_up[i] = f2e(p.z.real(), p.z.imag());
    }
    Point x{0, cplx(28 / 64.0, 57 / 64.0)}, y{0, cplx(60 / 64.0, 22 / 64.0)};
    double composed = green_second_variation(b, f1, f2, x, y);
    auto metric2 = [&](double e1, double e2) {
        return MetricEval([=](double px, double py) {
            cplx fzz = e1 * f1e(px, py) + e2 * f2e(px, py);
            MetricSample ms;
            ms.gxx = 1.0 + 0.5 * fzz.real();
            ms.gyy = 1.0 - 0.5 * fzz.real();
            ms.gxy = 0.5 * fzz.imag();
            ms.sqrtdet = 1.0 / std::sqrt(ms.gxx * ms.gyy - ms.gxy * ms.gxy);
            return ms;
        });
    };
    double eps = 1e-2;
    int n = 128, sc = 2;
    auto g = [&](double e1, double e2) {
        FdmGreenOracle o(n, metric2(e1, e2));
        return o.green(sc * 28, sc * 57, sc * 60, sc * 22);
    };
    double fd = (g(eps, eps) - g(eps, -eps) - g(-eps, eps) + g(-eps, -eps)) /
                (4 * eps * eps);
    CHECK(rel_err(composed, fd) < 1e-2);
}
