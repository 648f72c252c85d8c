#include "llab/rng.hpp"

#include <cmath>

#include "llab/common.hpp"

namespace llab {

namespace {
inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
    std::uint64_t p = std::uint64_t(a) * b;
    hi = std::uint32_t(p >> 32);
    lo = std::uint32_t(p);
}
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
}  // namespace

std::array<std::uint32_t, 4> PhiloxStream::block(std::uint64_t ctr) const {
    std::uint32_t c0 = std::uint32_t(ctr);
    std::uint32_t c1 = std::uint32_t(ctr >> 32);
    std::uint32_t c2 = std::uint32_t(stream_id_);
    std::uint32_t c3 = std::uint32_t(stream_id_ >> 32);
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c0, hi0, lo0);
        mulhilo(kPhiloxM1, c2, hi1, lo1);
        std::uint32_t n0 = hi1 ^ c1 ^ k0;
        std::uint32_t n1 = lo1;
        std::uint32_t n2 = hi0 ^ c3 ^ k1;
        std::uint32_t n3 = lo0;
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return {c0, c1, c2, c3};
}

double PhiloxStream::uniform(std::uint64_t i) const {
    auto b = block(i >> 1);
    std::uint32_t w0 = b[2 * (i & 1)];
    std::uint32_t w1 = b[2 * (i & 1) + 1];
    std::uint64_t u53 = (std::uint64_t(w0 & 0x1FFFFFu) << 32) | w1;
    return (double(u53) + 0.5) * (1.0 / 9007199254740992.0);  // 2^-53
}

void PhiloxStream::normal_pair(std::uint64_t i, double& z0, double& z1) const {
    double u1 = uniform(2 * i);
    double u2 = uniform(2 * i + 1);
    double r = std::sqrt(-2.0 * std::log(u1));
    z0 = r * std::cos(two_pi * u2);
    z1 = r * std::sin(two_pi * u2);
}

double PhiloxStream::normal(std::uint64_t i) const {
    double z0, z1;
    normal_pair(i >> 1, z0, z1);
    return (i & 1) ? z1 : z0;
}

}  // namespace llab
