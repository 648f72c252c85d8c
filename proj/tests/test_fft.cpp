#include <random>
#include <vector>

#include "doctest.h"
#include "llab/fft.hpp"

using namespace llab;

namespace {
// naive DFT as the independent reference
std::vector<cplx> dft_naive(const std::vector<cplx>& a, int sign) {
    int n = int(a.size());
    std::vector<cplx> out(n);
    for (int k = 0; k < n; ++k) {
        cplx acc(0, 0);
        for (int j = 0; j < n; ++j) {
            double ang = sign * two_pi * k * j / n;
            acc += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}
}  // namespace

TEST_CASE("fft matches naive dft") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int n : {2, 8, 64, 256}) {
        std::vector<cplx> a(n);
        for (auto& x : a) x = cplx(d(gen), d(gen));
        auto want = dft_naive(a, -1);
        auto got = a;
        fft_inplace(got.data(), n, -1);
        for (int i = 0; i < n; ++i) {
            CHECK(got[i].real() == doctest::Approx(want[i].real()).epsilon(1e-10));
            CHECK(got[i].imag() == doctest::Approx(want[i].imag()).epsilon(1e-10));
        }
    }
}

TEST_CASE("fft round trip is identity") {
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> d(-1, 1);
    int n = 128;
    std::vector<cplx> a(std::size_t(n) * n);
    for (auto& x : a) x = cplx(d(gen), d(gen));
    auto b = a;
    fft2_inplace(b.data(), n, -1);
    ifft2_normalized(b.data(), n);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(b[i] - a[i]) < 1e-12);
}

TEST_CASE("rejects non power of two workspace") {
    CHECK_THROWS_AS(Fft2Workspace(48), ConfigError);
}

TEST_CASE("synthesize_real reproduces plane waves") {
    int n = 32;
    Fft2Workspace ws(n);
    std::vector<cplx> spec(std::size_t(n) * n, cplx(0, 0));
    // cos(2 pi (3x + 5y)) = (e^{i...} + c.c.)/2 at (ky,kx)=(5,3)
    spec[std::size_t(5) * n + 3] = 0.5;
    spec[std::size_t(n - 5) * n + (n - 3)] = 0.5;
    std::vector<double> grid(std::size_t(n) * n);
    ws.synthesize_real(spec.data(), grid.data());
    for (int i = 0; i < n; i += 5)
        for (int j = 0; j < n; j += 3) {
            double x = double(j) / n, y = double(i) / n;
            CHECK(grid[std::size_t(i) * n + j] ==
                  doctest::Approx(std::cos(two_pi * (3 * x + 5 * y)))
                      .epsilon(1e-12));
        }
}
