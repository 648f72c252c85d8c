#include <cstdlib>
#include <cstring>

#include "llab/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#endif

namespace llab::simd {

bool have_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    bool avx2 = ebx & (1u << 5);
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    bool fma = ecx & (1u << 12);
    return avx2 && fma;
#else
    return false;
#endif
}

namespace {
const Kernels& pick() {
    const char* force = std::getenv("LLAB_SIMD");
    if (force && std::strcmp(force, "scalar") == 0) return scalar_kernels();
    if (force && std::strcmp(force, "avx2") == 0) {
        const Kernels* k = avx2_kernels();
        if (k && have_avx2()) return *k;
        return scalar_kernels();
    }
    if (have_avx2()) {
        const Kernels* k = avx2_kernels();
        if (k) return *k;
    }
    return scalar_kernels();
}
}  // namespace

const Kernels& active() {
    static const Kernels& k = pick();
    return k;
}

}  // namespace llab::simd
