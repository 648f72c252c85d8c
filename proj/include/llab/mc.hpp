#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "llab/common.hpp"

namespace llab::mc {

// Deterministic parallel Monte Carlo driver. Samples are partitioned into
// fixed blocks; workers claim whole blocks and results are combined in block
// order, so outputs are bit-identical for a fixed seed regardless of the
// worker count (stronger than the fixed-worker-count contract).
struct BlockStats {
    std::size_t obs_dim = 0;
    std::uint64_t samples_per_block = 0;
    std::vector<std::vector<double>> block_means;  // [block][obs]

    std::uint64_t total_samples() const {
        return samples_per_block * block_means.size();
    }
    std::vector<double> mean() const;

    // jackknife standard error of a smooth functional of the means
    struct Jackknife {
        double value = 0.0;
        double stderr_ = 0.0;
    };
    Jackknife jackknife(
        const std::function<double(const std::vector<double>&)>& f) const;
};

int worker_count(int requested);  // env LLAB_WORKERS override, 0 = hardware

// compute(sample_index, obs_out) fills obs_dim observables per sample
BlockStats run_mc(std::uint64_t samples, std::size_t obs_dim, int workers,
                  const std::function<void(std::uint64_t, double*)>& compute,
                  std::size_t n_blocks = 128);

}  // namespace llab::mc
