#pragma once

// Probability distribution functions for test statistics: standard normal,
// chi-square and Student t, built on the regularized incomplete gamma and
// beta functions.

#include <cmath>
#include <limits>
#include <string>

#include "spatialrisk/error.hpp"

namespace spatialrisk {

namespace detail {

constexpr double kDistEps = 1e-16;
constexpr int kDistMaxIter = 10000;

// Lower regularized gamma P(a, x) by series; valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kDistMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kDistEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by modified Lentz continued fraction; valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kDistMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kDistEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Continued fraction for the incomplete beta function.
inline double beta_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kDistMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kDistEps) break;
    }
    return h;
}

inline void require_df(double df) {
    if (!(df >= 1.0) || !std::isfinite(df)) {
        throw Error(ErrorKind::domain, "degrees of freedom must be >= 1, got " + std::to_string(df));
    }
}

}  // namespace detail

/// Upper regularized incomplete gamma Q(a, x).
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0)) throw Error(ErrorKind::domain, "gamma shape must be positive");
    if (x < 0.0) throw Error(ErrorKind::domain, "gamma argument must be nonnegative");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_fraction(a, x);
}

/// Regularized incomplete beta I_x(a, b).
inline double regularized_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::domain, "beta parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_fraction(b, a, 1.0 - x) / b;
}

inline double normal_pdf(double z) {
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Inverse of normal_cdf. Rational initial guess refined by Halley steps.
inline double normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::domain, "probability outside [0,1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    // Acklam's rational approximation, relative error ~1e-9.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int i = 0; i < 3; ++i) {
        // Work in the smaller tail to keep the residual accurate.
        const double e = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
        const double u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

/// P(X > x) for X ~ chi-square(df).
inline double chi2_sf(double x, double df) {
    detail::require_df(df);
    if (x < 0.0) throw Error(ErrorKind::domain, "chi-square statistic must be nonnegative");
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

/// P(T > t) for T ~ Student t(df).
inline double t_sf(double t, double df) {
    detail::require_df(df);
    if (std::isnan(t)) throw Error(ErrorKind::domain, "t statistic is NaN");
    const double tail = 0.5 * regularized_beta(df / (df + t * t), 0.5 * df, 0.5);
    return t > 0.0 ? tail : 1.0 - tail;
}

inline double t_cdf(double t, double df) { return t_sf(-t, df); }

/// Inverse of t_cdf by safeguarded bisection/Newton.
inline double t_quantile(double p, double df) {
    detail::require_df(df);
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::domain, "probability must lie in (0,1)");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -t_quantile(1.0 - p, df);
    double lo = 0.0, hi = 1.0;
    while (t_cdf(hi, df) < p) {
        lo = hi;
        hi *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        const double f = t_cdf(x, df) - p;
        if (f > 0.0) hi = x; else lo = x;
        const double dens =
            std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI) -
                     0.5 * (df + 1.0) * std::log1p(x * x / df));
        double next = x - f / dens;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) return next;
        x = next;
    }
    return x;
}

}  // namespace spatialrisk
