#include "llab/common.hpp"

namespace llab {

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

MeanErr mean_stderr(const std::vector<double>& x) {
    MeanErr r;
    r.n = x.size();
    if (r.n == 0) return r;
    r.mean = pairwise_sum(x) / double(r.n);
    if (r.n < 2) return r;
    std::vector<double> d2(r.n);
    for (std::size_t i = 0; i < r.n; ++i) d2[i] = sq(x[i] - r.mean);
    double var = pairwise_sum(d2) / double(r.n - 1);
    r.stderr_ = std::sqrt(var / double(r.n));
    return r;
}

}  // namespace llab
