#include <cmath>

#include "doctest.h"
#include "llab/gff.hpp"
#include "llab/mc.hpp"

using namespace llab;
using namespace llab::geometry;
using namespace llab::spectral;
using namespace llab::gff;

namespace {
SpectralBasis torus_basis(int n = 128, int L = 24) {
    return SpectralBasis::build(make_surface(SurfaceKind::Torus, n), L);
}
}  // namespace

TEST_CASE("same seed gives identical coefficients") {
    auto b = torus_basis();
    auto s1 = sample_gff(b, {42, 7});
    auto s2 = sample_gff(b, {42, 7});
    CHECK(s1.coeff == s2.coeff);
    auto s3 = sample_gff(b, {42, 8});
    CHECK(s1.coeff != s3.coeff);
}

TEST_CASE("per-mode sample variance is one") {
    auto b = torus_basis(64, 8);
    const int ns = 10000;
    int nm = std::min(6, b.num_modes());
    std::vector<double> acc(nm, 0.0);
    for (int i = 0; i < ns; ++i) {
        auto s = sample_gff(b, {11, std::uint64_t(i)});
        for (int m = 0; m < nm; ++m) acc[m] += s.coeff[m] * s.coeff[m];
    }
    for (int m = 0; m < nm; ++m)
        CHECK(acc[m] / ns == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("pairing with eigenfunctions reproduces coefficients") {
    auto b = torus_basis();
    auto s = sample_gff(b, {3, 0});
    for (int n : {0, 5, 41}) {
        auto en = b.mode_grid(n);
        double want = std::sqrt(two_pi / b.lambda(n)) * s.coeff[n];
        CHECK(pair_field(b, s, en) == doctest::Approx(want).epsilon(1e-10));
    }
    // constant test function pairs to zero exactly (no constant mode)
    std::vector<double> ones(b.surface().grid_size(), 1.0);
    CHECK(std::abs(pair_field(b, s, ones)) < 1e-12);
}

TEST_CASE("grid pairing equals coefficient pairing") {
    auto b = torus_basis();
    auto s = sample_gff(b, {5, 1});
    // generic smooth f
    const auto& surf = b.surface();
    std::vector<double> f(surf.grid_size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        Point p = surf.point(i);
        f[i] = std::sin(two_pi * p.z.real()) * std::cos(two_pi * 2 * p.z.imag()) +
               0.3;
    }
    // direct grid quadrature with the synthesized field
    auto X = field_grid(b, s);
    double direct = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        direct += surf.weights()[i] * X[i] * f[i];
    CHECK(pair_field(b, s, f) == doctest::Approx(direct).epsilon(1e-11));
}

TEST_CASE("mc covariance of pairings matches green quadrature") {
    auto b = torus_basis(64, 16);
    const auto& surf = b.surface();
    // three band-limited test functions
    auto mkf = [&](int kx, int ky, double amp, double shift) {
        std::vector<double> f(surf.grid_size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            Point p = surf.point(i);
            f[i] = amp * std::cos(two_pi * (kx * p.z.real() + ky * p.z.imag()) +
                                  shift);
        }
        return f;
    };
    std::vector<std::vector<double>> fs = {mkf(1, 0, 1.0, 0.3),
                                           mkf(2, 1, 0.8, -0.5),
                                           mkf(0, 3, 1.2, 1.1)};
    // oracle: Int Int G f h = sum_n (2pi/lambda) <e_n,f><e_n,h>
    auto green_quad = [&](const std::vector<double>& f,
                          const std::vector<double>& h) {
        auto pf = b.project(f), ph = b.project(h);
        double acc = 0.0;
        for (int n = 0; n < b.num_modes(); ++n)
            acc += two_pi / b.lambda(n) * pf[n] * ph[n];
        return acc;
    };
    const int ns = 10000;
    for (auto [a, c] : {std::pair<int, int>{0, 1}, {0, 2}, {1, 2}}) {
        std::vector<double> va(ns), vc(ns);
        auto pa = b.project(fs[a]), pc = b.project(fs[c]);
        for (int i = 0; i < ns; ++i) {
            auto s = sample_gff(b, {99, std::uint64_t(i)});
            auto coef = field_coefficients(b, s);
            double xa = 0, xc = 0;
            for (int n = 0; n < b.num_modes(); ++n) {
                xa += coef[n] * pa[n];
                xc += coef[n] * pc[n];
            }
            va[i] = xa;
            vc[i] = xc;
        }
        double m_a = pairwise_sum(va) / ns, m_c = pairwise_sum(vc) / ns;
        std::vector<double> prod(ns);
        for (int i = 0; i < ns; ++i) prod[i] = (va[i] - m_a) * (vc[i] - m_c);
        auto est = mean_stderr(prod);
        double want = green_quad(fs[a], fs[c]);
        CHECK(std::abs(est.mean - want) < 3.0 * est.stderr_);
    }
}

TEST_CASE("circle average variance matches the spectral diagonal") {
    auto b = torus_basis(64, 16);
    Point x{0, cplx(0.31, 0.44)};
    double delta = 0.125;
    double want = circle_averaged_green(b, x, x, delta);
    const int ns = 10000;
    std::vector<double> v(ns);
    for (int i = 0; i < ns; ++i) {
        auto s = sample_gff(b, {123, std::uint64_t(i)});
        v[i] = circle_average(b, s, x, delta);
    }
    std::vector<double> v2(ns);
    for (int i = 0; i < ns; ++i) v2[i] = v[i] * v[i];
    auto est = mean_stderr(v2);
    CHECK(std::abs(est.mean - want) < 3.0 * est.stderr_);
}

TEST_CASE("smooth-field circle average approaches the pointwise value") {
    auto b = torus_basis(128, 2);  // band limit well below 1/delta
    auto s = sample_gff(b, {5, 2});
    Point x{0, cplx(0.4, 0.6)};
    auto X = field_grid(b, s);
    double pointwise = X[b.surface().index(0, int(0.6 * 128), int(0.4 * 128))];
    double avg = circle_average(b, s, x, 1.0 / 64);
    CHECK(avg == doctest::Approx(pointwise).epsilon(0.05));
}

TEST_CASE("gaussianity of pairings: skewness and kurtosis") {
    auto b = torus_basis(64, 12);
    const auto& surf = b.surface();
    std::vector<double> f(surf.grid_size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        Point p = surf.point(i);
        f[i] = std::cos(two_pi * p.z.real()) + 0.5 * std::sin(two_pi * 2 * p.z.imag());
    }
    auto pf = b.project(f);
    const int ns = 10000;
    std::vector<double> v(ns);
    for (int i = 0; i < ns; ++i) {
        auto s = sample_gff(b, {2024, std::uint64_t(i)});
        auto c = field_coefficients(b, s);
        double acc = 0;
        for (int n = 0; n < b.num_modes(); ++n) acc += c[n] * pf[n];
        v[i] = acc;
    }
    double m = pairwise_sum(v) / ns;
    double s2 = 0, s3 = 0, s4 = 0;
    for (double x : v) {
        double d = x - m;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    s2 /= ns;
    s3 /= ns;
    s4 /= ns;
    double skew = s3 / std::pow(s2, 1.5);
    double kurt = s4 / (s2 * s2) - 3.0;
    // standard errors of skewness/kurtosis for gaussian samples
    double se_skew = std::sqrt(6.0 / ns), se_kurt = std::sqrt(24.0 / ns);
    CHECK(std::abs(skew) < 5.0 * se_skew);
    CHECK(std::abs(kurt) < 5.0 * se_kurt);
}

TEST_CASE("distinct streams decorrelate") {
    auto b = torus_basis(64, 10);
    const int ns = 4000;
    double corr = 0.0;
    int nm = b.num_modes();
    for (int i = 0; i < ns; ++i) {
        auto s1 = sample_gff(b, {7, std::uint64_t(2 * i)});
        auto s2 = sample_gff(b, {7, std::uint64_t(2 * i + 1)});
        double dot = 0;
        for (int n = 0; n < nm; ++n) dot += s1.coeff[n] * s2.coeff[n];
        corr += dot / nm;
    }
    corr /= ns;
    CHECK(std::abs(corr) < 3.0 / std::sqrt(double(ns) * nm));
}
