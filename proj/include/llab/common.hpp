#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace llab {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Error hierarchy; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Bad structural input: grid sizes, cutoffs, malformed configs.
struct ConfigError : Error {
    using Error::Error;
};
// Physics parameter out of its admissible range (gamma, Seiberg, mu).
struct DomainError : Error {
    using Error::Error;
};
// Requested scale below what the discretization resolves.
struct ResolutionError : Error {
    using Error::Error;
};
// Numerical failure during an otherwise valid computation.
struct ComputeError : Error {
    using Error::Error;
};

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline double sq(double x) { return x * x; }

// Relative deviation with a floor so exact zeros compare cleanly.
inline double rel_err(double got, double want, double floor = 1e-300) {
    double denom = std::max(std::abs(want), floor);
    return std::abs(got - want) / denom;
}

// Deterministic pairwise summation (index order fixed, worker independent).
double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(x.data(), x.size());
}

// Mean / sample stderr of a vector, pairwise-reduced.
struct MeanErr {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};
MeanErr mean_stderr(const std::vector<double>& x);

}  // namespace llab
