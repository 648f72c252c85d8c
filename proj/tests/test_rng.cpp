#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "llab/common.hpp"
#include "llab/rng.hpp"

using namespace llab;

TEST_CASE("streams are deterministic and order free") {
    PhiloxStream s(0x1234567890abcdefULL, 42);
    double a = s.normal(17);
    double b = s.normal(3);
    PhiloxStream t(0x1234567890abcdefULL, 42);
    CHECK(t.normal(3) == b);
    CHECK(t.normal(17) == a);
}

TEST_CASE("different streams and seeds decorrelate") {
    const int n = 200000;
    PhiloxStream s1(9, 0), s2(9, 1), s3(10, 0);
    double c12 = 0, c13 = 0, m1 = 0, m2 = 0, m3 = 0;
    for (int i = 0; i < n; ++i) {
        double x = s1.normal(i), y = s2.normal(i), z = s3.normal(i);
        c12 += x * y;
        c13 += x * z;
        m1 += x;
        m2 += y;
        m3 += z;
    }
    c12 /= n;
    c13 /= n;
    m1 /= n;
    m2 /= n;
    m3 /= n;
    double bound = 3.5 / std::sqrt(double(n));
    CHECK(std::abs(c12 - m1 * m2) < bound);
    CHECK(std::abs(c13 - m1 * m3) < bound);
    CHECK(std::abs(m1) < bound);
}

TEST_CASE("normals have unit variance and gaussian moments") {
    PhiloxStream s(123, 7);
    const int n = 400000;
    double m = 0, v = 0, s3 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        double x = s.normal(i);
        m += x;
        v += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
    }
    m /= n;
    v = v / n - m * m;
    s3 /= n;
    s4 /= n;
    CHECK(std::abs(m) < 0.006);
    CHECK(v == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(s3) < 0.02);
    CHECK(s4 == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("uniforms stay inside (0,1) and fill the range") {
    PhiloxStream s(55, 0);
    double lo = 1, hi = 0;
    for (int i = 0; i < 100000; ++i) {
        double u = s.uniform(i);
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 1e-3);
    CHECK(hi > 1.0 - 1e-3);
}

TEST_CASE("philox blocks differ across counters and streams") {
    PhiloxStream s(1, 2);
    std::set<std::uint32_t> words;
    for (std::uint64_t c = 0; c < 1000; ++c) {
        auto b = s.block(c);
        for (auto w : b) words.insert(w);
    }
    CHECK(words.size() > 3990);  // 4000 words, collisions very unlikely
}
