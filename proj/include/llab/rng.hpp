#pragma once

#include <array>
#include <cstdint>

namespace llab {

// Philox 4x32-10 counter-based generator. A stream is (root_seed, stream_id);
// the counter is the draw index, so any draw can be produced independently of
// the others. Parallel workers get disjoint streams and results do not depend
// on scheduling.
class PhiloxStream {
  public:
    PhiloxStream(std::uint64_t root_seed, std::uint64_t stream_id)
        : key_{std::uint32_t(root_seed), std::uint32_t(root_seed >> 32)},
          stream_id_(stream_id) {}

    // 4 x 32-bit words for block index `ctr`
    std::array<std::uint32_t, 4> block(std::uint64_t ctr) const;

    // uniform double in (0,1), draw index i
    double uniform(std::uint64_t i) const;

    // standard normal pair via Box-Muller on draws (2i, 2i+1); fully
    // deterministic (no rejection), so indices map 1:1 to values
    void normal_pair(std::uint64_t i, double& z0, double& z1) const;

    // i-th standard normal
    double normal(std::uint64_t i) const;

    std::uint64_t stream_id() const { return stream_id_; }

  private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_id_;
};

}  // namespace llab
