#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "spatialrisk/numkernel.hpp"

namespace oracle {

using spatialrisk::DenseMatrix;
using spatialrisk::Vector;

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = nd(gen);
    return m;
}

/// Column z-scores with the n-1 divisor, computed directly.
inline DenseMatrix zscore(const DenseMatrix& m) {
    DenseMatrix out = m;
    const double n = static_cast<double>(m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j);
        const double mu = s / n;
        for (std::size_t i = 0; i < m.rows(); ++i) ss += (m(i, j) - mu) * (m(i, j) - mu);
        const double sd = std::sqrt(ss / (n - 1.0));
        for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = (m(i, j) - mu) / sd;
    }
    return out;
}

/// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        if (a[piv][k] == 0.0) return 0.0;
        if (piv != k) {
            std::swap(a[piv], a[k]);
            det = -det;
        }
        det *= a[k][k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
        }
    }
    return det;
}

inline double char_poly(const DenseMatrix& m, double lambda) {
    std::vector<std::vector<double>> a(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) a[i][j] = m(i, j) - (i == j ? lambda : 0.0);
    return determinant(std::move(a));
}

/// Eigenvalues of a symmetric matrix with distinct eigenvalues, as the sign
/// changes of det(A - lambda I) on a Gershgorin-bounded grid, refined by
/// bisection. Descending order.
inline Vector eigenvalues_by_char_poly(const DenseMatrix& m, std::size_t grid = 4000) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double radius = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (j != i) radius += std::abs(m(i, j));
        lo = std::min(lo, m(i, i) - radius);
        hi = std::max(hi, m(i, i) + radius);
    }
    lo -= 1e-3;
    hi += 1e-3;
    for (;;) {
        Vector roots;
        double prev_x = lo, prev_f = char_poly(m, lo);
        for (std::size_t k = 1; k <= grid; ++k) {
            const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid);
            const double f = char_poly(m, x);
            if (f == 0.0) {
                roots.push_back(x);
            } else if ((f < 0) != (prev_f < 0) && prev_f != 0.0) {
                double a = prev_x, b = x, fa = prev_f;
                for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
                    const double mid = 0.5 * (a + b);
                    const double fm = char_poly(m, mid);
                    if ((fm < 0) == (fa < 0)) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                roots.push_back(0.5 * (a + b));
            }
            prev_x = x;
            prev_f = f;
        }
        if (roots.size() == m.rows() || grid > 2'000'000) {
            std::sort(roots.rbegin(), roots.rend());
            return roots;
        }
        grid *= 8;  // two roots fell in one cell
    }
}

/// Solves (X^T X) b = X^T y by Gauss-Jordan elimination on the normal equations.
inline Vector normal_equations(const DenseMatrix& x, const Vector& y) {
    const std::size_t p = x.cols();
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t r = 0; r < x.rows(); ++r) a[i][j] += x(r, i) * x(r, j);
        for (std::size_t r = 0; r < x.rows(); ++r) a[i][p] += x(r, i) * y[r];
    }
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < p; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        for (std::size_t i = 0; i < p; ++i) {
            if (i == k) continue;
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j <= p; ++j) a[i][j] -= f * a[k][j];
        }
    }
    Vector b(p);
    for (std::size_t i = 0; i < p; ++i) b[i] = a[i][p] / a[i][i];
    return b;
}

/// O(n^2) concordant / discordant pair counts; ties in either vector count as neither.
inline std::pair<std::uint64_t, std::uint64_t> brute_force_pairs(const Vector& a, const Vector& b) {
    std::uint64_t c = 0, d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double s = (a[i] - a[j]) * (b[i] - b[j]);
            if (s > 0) ++c;
            else if (s < 0) ++d;
        }
    return {c, d};
}

/// Best single split on one feature by exhaustive search: (threshold, SSE).
inline std::pair<double, double> best_stump(const Vector& x, const Vector& y, std::size_t min_leaf) {
    Vector xs = x;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double best_t = std::nan(""), best_sse = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const double t = 0.5 * (xs[k] + xs[k + 1]);
        double sl = 0, sr = 0, nl = 0, nr = 0;
        for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= t ? (sl += y[i], nl += 1) : (sr += y[i], nr += 1));
        if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) continue;
        double sse = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double m = x[i] <= t ? sl / nl : sr / nr;
            sse += (y[i] - m) * (y[i] - m);
        }
        if (sse < best_sse) {
            best_sse = sse;
            best_t = t;
        }
    }
    return {best_t, best_sse};
}

/// Student-t density integrated by composite Simpson's rule from 0 to |t|.
inline double t_cdf_by_quadrature(double t, double df) {
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
    auto f = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
    const int n = 20000;
    const double h = std::abs(t) / n;
    double s = f(0) + f(std::abs(t));
    for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    const double half = s * h / 3.0;
    return t >= 0 ? 0.5 + half : 0.5 - half;
}

}  // namespace oracle
