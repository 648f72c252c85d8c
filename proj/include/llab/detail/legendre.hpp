#pragma once

#include <cmath>
#include <vector>

// Fully normalized associated Legendre functions with Condon-Shortley phase:
// Int_{-1}^{1} Pbar_l^m(t)^2 dt = 1. Real spherical harmonics are
//   m = 0: Pbar_l^0 / sqrt(2 pi)
//   m > 0: Pbar_l^m cos(m phi)/sqrt(pi), Pbar_l^m sin(m phi)/sqrt(pi)
namespace llab::detail {

// fills out[l*(l+1)/2 + m] for l in [0, lmax], m in [0, l]
inline void legendre_all(int lmax, double t, double* out) {
    double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    out[0] = std::sqrt(0.5);  // Pbar_0^0
    for (int m = 1; m <= lmax; ++m) {
        int im = m * (m + 1) / 2 + m;
        int im1 = (m - 1) * m / 2 + (m - 1);
        out[im] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * out[im1];
    }
    for (int m = 0; m < lmax; ++m) {
        int i0 = m * (m + 1) / 2 + m;
        int i1 = (m + 1) * (m + 2) / 2 + m;
        out[i1] = std::sqrt(2.0 * m + 3.0) * t * out[i0];
    }
    for (int m = 0; m <= lmax; ++m) {
        for (int l = m + 2; l <= lmax; ++l) {
            double a = std::sqrt((4.0 * l * l - 1.0) /
                                 (double(l - m) * double(l + m)));
            double b = std::sqrt((2.0 * l + 1.0) * (l - 1.0 - m) *
                                 (l - 1.0 + m) /
                                 ((2.0 * l - 3.0) * (l - m) * (l + m)));
            out[l * (l + 1) / 2 + m] = a * t * out[(l - 1) * l / 2 + m] -
                                       b * out[(l - 2) * (l - 1) / 2 + m];
        }
    }
}

// d/dt Pbar_l^m via (1-t^2) d/dt P = d_lm P_{l-1}^m - l t P_l^m
inline void legendre_derivs(int lmax, double t, const double* p, double* dp) {
    double omt2 = 1.0 - t * t;
    for (int l = 0; l <= lmax; ++l)
        for (int m = 0; m <= l; ++m) {
            int i = l * (l + 1) / 2 + m;
            double dlm = l > m ? std::sqrt((2.0 * l + 1.0) *
                                           (double(l) * l - double(m) * m) /
                                           (2.0 * l - 1.0))
                               : 0.0;
            double num = (l > 0 && l > m ? dlm * p[(l - 1) * l / 2 + m] : 0.0) -
                         l * t * p[i];
            dp[i] = num / omt2;
        }
}

// d2/dt2 from the associated Legendre ODE
inline void legendre_second(int lmax, double t, const double* p,
                            const double* dp, double* ddp) {
    double omt2 = 1.0 - t * t;
    for (int l = 0; l <= lmax; ++l)
        for (int m = 0; m <= l; ++m) {
            int i = l * (l + 1) / 2 + m;
            double lam = double(l) * (l + 1);
            ddp[i] = (2.0 * t * dp[i] -
                      (lam - double(m) * m / omt2) * p[i]) /
                     omt2;
        }
}

// plain Legendre polynomials P_0..P_lmax(t)
inline void legendre_pl(int lmax, double t, double* out) {
    out[0] = 1.0;
    if (lmax >= 1) out[1] = t;
    for (int l = 2; l <= lmax; ++l)
        out[l] = ((2.0 * l - 1.0) * t * out[l - 1] -
                  (l - 1.0) * out[l - 2]) /
                 l;
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton on P_n
inline void gauss_legendre(int n, std::vector<double>& x,
                           std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int l = 2; l <= n; ++l) {
                double p2 = ((2.0 * l - 1.0) * t * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        double p0 = 1.0, p1 = t;
        for (int l = 2; l <= n; ++l) {
            double p2 = ((2.0 * l - 1.0) * t * p1 - (l - 1.0) * p0) / l;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (t * p1 - p0) / (t * t - 1.0);
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

}  // namespace llab::detail
