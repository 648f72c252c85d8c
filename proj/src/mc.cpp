#include "llab/mc.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace llab::mc {

int worker_count(int requested) {
    if (const char* env = std::getenv("LLAB_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

std::vector<double> BlockStats::mean() const {
    std::vector<double> m(obs_dim, 0.0);
    for (const auto& b : block_means)
        for (std::size_t k = 0; k < obs_dim; ++k) m[k] += b[k];
    for (auto& v : m) v /= double(block_means.size());
    return m;
}

BlockStats::Jackknife BlockStats::jackknife(
    const std::function<double(const std::vector<double>&)>& f) const {
    std::size_t nb = block_means.size();
    std::vector<double> total(obs_dim, 0.0);
    for (const auto& b : block_means)
        for (std::size_t k = 0; k < obs_dim; ++k) total[k] += b[k];
    std::vector<double> m(obs_dim);
    for (std::size_t k = 0; k < obs_dim; ++k) m[k] = total[k] / double(nb);
    Jackknife out;
    out.value = f(m);
    std::vector<double> fi(nb);
    std::vector<double> loo(obs_dim);
    double fbar = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t k = 0; k < obs_dim; ++k)
            loo[k] = (total[k] - block_means[i][k]) / double(nb - 1);
        fi[i] = f(loo);
        fbar += fi[i];
    }
    fbar /= double(nb);
    double var = 0.0;
    for (std::size_t i = 0; i < nb; ++i) var += sq(fi[i] - fbar);
    var *= double(nb - 1) / double(nb);
    out.stderr_ = std::sqrt(var);
    return out;
}

BlockStats run_mc(std::uint64_t samples, std::size_t obs_dim, int workers,
                  const std::function<void(std::uint64_t, double*)>& compute,
                  std::size_t n_blocks) {
    BlockStats stats;
    stats.obs_dim = obs_dim;
    stats.samples_per_block = (samples + n_blocks - 1) / n_blocks;
    stats.block_means.assign(n_blocks, std::vector<double>(obs_dim, 0.0));
    int nw = worker_count(workers);

    std::atomic<std::size_t> next_block{0};
    auto work = [&]() {
        std::vector<double> obs(obs_dim);
        std::vector<double> acc(obs_dim);
        for (;;) {
            std::size_t blk = next_block.fetch_add(1);
            if (blk >= n_blocks) return;
            std::fill(acc.begin(), acc.end(), 0.0);
            std::uint64_t begin = blk * stats.samples_per_block;
            std::uint64_t end = begin + stats.samples_per_block;
            for (std::uint64_t i = begin; i < end; ++i) {
                compute(i, obs.data());
                for (std::size_t k = 0; k < obs_dim; ++k) acc[k] += obs[k];
            }
            auto& bm = stats.block_means[blk];
            for (std::size_t k = 0; k < obs_dim; ++k)
                bm[k] = acc[k] / double(stats.samples_per_block);
        }
    };
    if (nw <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nw; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return stats;
}

}  // namespace llab::mc
