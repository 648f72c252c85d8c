#include <cmath>

#include "doctest.h"
#include "llab/fft.hpp"
#include "llab/gmc.hpp"

using namespace llab;
using namespace llab::geometry;
using namespace llab::spectral;
using namespace llab::gff;
using namespace llab::gmc;

namespace {
SpectralBasis torus_basis(int n = 64, int L = 24) {
    return SpectralBasis::build(make_surface(SurfaceKind::Torus, n), L);
}
const double kDelta = 1.0 / 6;  // respects the 4/cutoff floor at L = 24
}  // namespace

TEST_CASE("gamma near zero reduces masses to cell volumes") {
    auto b = torus_basis();
    auto s = sample_gff(b, {1, 0});
    auto m = gmc_measure(b, s, 1e-9, kDelta);
    const auto& w = b.surface().weights();
    for (std::size_t i = 0; i < m.mass.size(); i += 57)
        CHECK(m.mass[i] == doctest::Approx(w[i]).epsilon(1e-6));
    CHECK(m.total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("parameter and resolution validation") {
    auto b = torus_basis();
    auto s = sample_gff(b, {1, 0});
    CHECK_THROWS_AS(gmc_measure(b, s, 2.0, kDelta), DomainError);
    CHECK_THROWS_AS(gmc_measure(b, s, -0.5, kDelta), DomainError);
    CHECK_THROWS_AS(gmc_measure(b, s, 1.0, 1.0 / 128), ResolutionError);
}

TEST_CASE("masses are nonnegative and exactly additive over regions") {
    auto b = torus_basis();
    auto s = sample_gff(b, {17, 3});
    auto m = gmc_measure(b, s, 1.2, kDelta);
    for (double v : m.mass) CHECK(v >= 0.0);
    std::vector<std::size_t> a, c;
    for (std::size_t i = 0; i < m.mass.size(); ++i)
        (i % 2 ? a : c).push_back(i);
    CHECK(region_mass(m, a) + region_mass(m, c) ==
          doctest::Approx(m.total).epsilon(1e-14));
}

TEST_CASE("first moment identity at gamma 0.5 and 1.0") {
    auto b = torus_basis();
    const auto& surf = b.surface();
    // region: the lower-left quadrant of cells
    std::vector<std::size_t> region;
    int n = surf.n();
    for (int i = 0; i < n / 2; ++i)
        for (int j = 0; j < n / 2; ++j) region.push_back(surf.index(0, i, j));
    const int ns = 10000;
    for (double gamma : {0.5, 1.0}) {
        std::vector<double> v(ns);
        for (int i = 0; i < ns; ++i) {
            auto s = sample_gff(b, {31, std::uint64_t(i)});
            v[i] = region_mass(gmc_measure(b, s, gamma, kDelta), region);
        }
        auto est = mean_stderr(v);
        // oracle: Int_A e^{(gamma^2/2} m_hat} dv (m_hat constant on the torus)
        double m_hat = circle_variance(b, kDelta) + std::log(kDelta);
        double want = std::exp(0.5 * gamma * gamma * m_hat) * 0.25;
        CHECK(std::abs(est.mean - want) < 3.0 * est.stderr_);
        // and the relative error is actually small, not just inside wide bars
        CHECK(rel_err(est.mean, want) < 0.05);
    }
}

TEST_CASE("second moment identity at gamma 1.0") {
    auto b = torus_basis();
    const auto& surf = b.surface();
    int n = surf.n();
    // small square region
    std::vector<std::size_t> region;
    for (int i = 8; i < 20; ++i)
        for (int j = 8; j < 20; ++j) region.push_back(surf.index(0, i, j));
    double gamma = 1.0;
    const int ns = 10000;
    std::vector<double> v(ns);
    for (int i = 0; i < ns; ++i) {
        auto s = sample_gff(b, {77, std::uint64_t(i)});
        double mm = region_mass(gmc_measure(b, s, gamma, kDelta), region);
        v[i] = mm * mm;
    }
    auto est = mean_stderr(v);
    // oracle: double quadrature of e^{gamma^2 C(x,y)} with the stencil kernel;
    // C(x,y) depends on x - y, tabulated by FFT of the multiplier spectrum
    double m_hat = circle_variance(b, kDelta) + std::log(kDelta);
    std::vector<cplx> spec(std::size_t(n) * n, cplx(0, 0));
    auto mult = b.circle_multiplier(kDelta);
    const auto& modes = b.modes();
    for (int q = 0; q < b.num_modes(); q += 2) {
        double c = 2.0 * two_pi / b.lambda(q) * mult[q] * mult[q];
        int ii = (modes[q].b % n + n) % n, jj = (modes[q].a % n + n) % n;
        spec[std::size_t(ii) * n + jj] += 0.5 * c;
        spec[std::size_t((n - ii) % n) * n + (n - jj) % n] += 0.5 * c;
    }
    Fft2Workspace ws(n);
    std::vector<double> cgrid(std::size_t(n) * n);
    ws.synthesize_real(spec.data(), cgrid.data());
    double dens = std::exp(0.5 * gamma * gamma * m_hat);
    double want = 0.0;
    for (auto ia : region)
        for (auto ic : region) {
            int r1 = int(ia) / n, c1 = int(ia) % n;
            int r2 = int(ic) / n, c2 = int(ic) % n;
            int dr = (r1 - r2 + n) % n, dc = (c1 - c2 + n) % n;
            double cc = cgrid[std::size_t(dr) * n + dc];
            want += surf.weights()[ia] * surf.weights()[ic] * dens * dens *
                    std::exp(gamma * gamma * cc);
        }
    CHECK(std::abs(est.mean - want) < 3.0 * est.stderr_);
    CHECK(rel_err(est.mean, want) < 0.1);
}

TEST_CASE("convergence diagnostic trends") {
    auto b = torus_basis(128, 32);
    std::vector<double> deltas = {1.0 / 4, 1.0 / 5.04, 1.0 / 6.35, 1.0 / 8.0};
    // gamma = 0.5: increments shrink in MC mean
    const int ns = 200;
    std::vector<double> inc_first(ns), inc_last(ns);
    for (int i = 0; i < ns; ++i) {
        auto s = sample_gff(b, {8, std::uint64_t(i)});
        auto rep = gmc_convergence(b, s, 0.5, deltas);
        inc_first[i] = rep.increments.front();
        inc_last[i] = rep.increments.back();
    }
    CHECK(pairwise_sum(inc_last) < pairwise_sum(inc_first));
    // gamma -> 0: increments identically zero
    auto s = sample_gff(b, {8, 0});
    auto rep0 = gmc_convergence(b, s, 0.0, deltas);
    for (double d : rep0.increments) CHECK(d == 0.0);
    // near-critical gamma flags heavy tails; moderate gamma does not
    int flagged_high = 0, flagged_low = 0;
    for (int i = 0; i < 20; ++i) {
        auto si = sample_gff(b, {8, std::uint64_t(i)});
        flagged_high += gmc_convergence(b, si, 1.8, deltas).heavy_tail_flag;
        flagged_low += gmc_convergence(b, si, 0.5, deltas).heavy_tail_flag;
    }
    CHECK(flagged_high >= 14);
    CHECK(flagged_low <= 2);
}
