#pragma once

// Dense linear algebra used by every statistical module: a row-major matrix,
// cyclic Jacobi eigendecomposition for symmetric matrices and Householder QR
// least squares.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spatialrisk/error.hpp"

namespace spatialrisk {

using Vector = std::vector<double>;

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorKind::dimension, "matrix data length " + std::to_string(data_.size()) +
                                                  " does not equal " + std::to_string(rows_) + "x" +
                                                  std::to_string(cols_));
        }
    }
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw Error(ErrorKind::dimension, "ragged matrix initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    Vector col(std::size_t c) const {
        Vector out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }
    void set_col(std::size_t c, std::span<const double> values) {
        if (values.size() != rows_) throw Error(ErrorKind::dimension, "column length mismatch");
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    DenseMatrix transpose() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    /// Copy of the listed columns, in the listed order.
    DenseMatrix select_cols(std::span<const std::size_t> cols) const {
        DenseMatrix out(rows_, cols.size());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t k = 0; k < cols.size(); ++k) out(r, k) = (*this)(r, cols[k]);
        return out;
    }

    DenseMatrix select_rows(std::span<const std::size_t> rows) const {
        DenseMatrix out(rows.size(), cols_);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            auto src = row(rows[k]);
            std::copy(src.begin(), src.end(), out.row(k).begin());
        }
        return out;
    }

    /// [1 | this], the design matrix with a leading intercept column.
    DenseMatrix with_intercept() const {
        DenseMatrix out(rows_, cols_ + 1);
        for (std::size_t r = 0; r < rows_; ++r) {
            out(r, 0) = 1.0;
            for (std::size_t c = 0; c < cols_; ++c) out(r, c + 1) = (*this)(r, c);
        }
        return out;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::dimension, "cannot multiply " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " by " +
                                              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorKind::dimension, "matrix subtraction shape mismatch");
    DenseMatrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

inline Vector multiply(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw Error(ErrorKind::dimension, "matrix-vector shape mismatch");
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        out[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample variance with divisor n-1.
inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw Error(ErrorKind::degenerate, "median of empty vector");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/// Sample covariance (divisor n-1) of the columns of `m`.
inline DenseMatrix sample_covariance(const DenseMatrix& m) {
    const std::size_t n = m.rows(), p = m.cols();
    if (n < 2) throw Error(ErrorKind::domain, "covariance needs at least two rows");
    Vector means(p, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < p; ++c) means[c] += m(r, c);
    for (double& v : means) v /= static_cast<double>(n);
    DenseMatrix cov(p, p);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < p; ++i) {
            const double di = m(r, i) - means[i];
            for (std::size_t j = i; j < p; ++j) cov(i, j) += di * (m(r, j) - means[j]);
        }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) {
            cov(i, j) /= static_cast<double>(n - 1);
            cov(j, i) = cov(i, j);
        }
    return cov;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

struct EigenResult {
    Vector eigenvalues;        // descending
    DenseMatrix eigenvectors;  // column k pairs with eigenvalues[k]
};

struct JacobiOptions {
    int max_sweeps = 100;
    double off_diagonal_tolerance = 1e-12;  // relative to the Frobenius norm of the input
};

/// Cyclic Jacobi rotations. Throws dimension error on non-square or asymmetric
/// input and convergence error if the sweep cap is reached.
inline EigenResult symmetric_eigen(const DenseMatrix& m, JacobiOptions opts = {}) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw Error(ErrorKind::dimension, "eigendecomposition needs a square matrix");
    if (!m.all_finite()) throw Error(ErrorKind::domain, "matrix has non-finite entries");
    double scale = 1.0;
    for (double v : m.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-9 * scale)
                throw Error(ErrorKind::dimension, "matrix is not symmetric at (" + std::to_string(i) +
                                                      "," + std::to_string(j) + ")");

    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + m(j, i));
    DenseMatrix v = DenseMatrix::identity(n);

    const double norm = a.frobenius_norm();
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    bool converged = false;
    for (int sweep = 0; sweep <= opts.max_sweeps; ++sweep) {
        const double off = off_norm();
        if (off <= opts.off_diagonal_tolerance * norm || off == 0.0) {
            converged = true;
            break;
        }
        if (sweep == opts.max_sweeps) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a(r, p), arq = a(r, q);
                        a(r, p) = a(p, r) = c * arp - s * arq;
                        a(r, q) = a(q, r) = s * arp + c * arq;
                    }
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }
    if (!converged) {
        throw Error(ErrorKind::convergence, "Jacobi eigendecomposition did not converge in " +
                                                std::to_string(opts.max_sweeps) + " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenResult out{Vector(n), DenseMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Least squares

/// Householder QR of a tall matrix. Rank deficiency is detected column by column:
/// a column whose remaining norm after projection falls below `rank_tolerance`
/// times its original norm raises SingularityError naming that column.
class HouseholderQr {
public:
    explicit HouseholderQr(const DenseMatrix& x, double rank_tolerance = 1e-10)
        : qr_(x), beta_(x.cols(), 0.0), diag_(x.cols(), 0.0) {
        const std::size_t n = x.rows(), p = x.cols();
        if (n < p) {
            throw Error(ErrorKind::dimension, "least squares needs rows >= columns (" + std::to_string(n) +
                                                  " < " + std::to_string(p) + ")");
        }
        if (!x.all_finite()) throw Error(ErrorKind::domain, "design matrix has non-finite entries");
        for (std::size_t j = 0; j < p; ++j) {
            double orig = 0.0;
            for (std::size_t i = 0; i < n; ++i) orig += x(i, j) * x(i, j);
            orig = std::sqrt(orig);
            double norm = 0.0;
            for (std::size_t i = j; i < n; ++i) norm += qr_(i, j) * qr_(i, j);
            norm = std::sqrt(norm);
            if (orig == 0.0 || norm <= rank_tolerance * orig) {
                throw SingularityError(j, "design matrix is rank deficient at column " + std::to_string(j));
            }
            const double alpha = qr_(j, j) > 0.0 ? -norm : norm;
            // v = x - alpha e1, stored in place below the diagonal (v_j kept in qr_(j,j)).
            qr_(j, j) -= alpha;
            double vnorm2 = 0.0;
            for (std::size_t i = j; i < n; ++i) vnorm2 += qr_(i, j) * qr_(i, j);
            beta_[j] = vnorm2 > 0.0 ? 2.0 / vnorm2 : 0.0;
            for (std::size_t k = j + 1; k < p; ++k) {
                double s = 0.0;
                for (std::size_t i = j; i < n; ++i) s += qr_(i, j) * qr_(i, k);
                s *= beta_[j];
                for (std::size_t i = j; i < n; ++i) qr_(i, k) -= s * qr_(i, j);
            }
            diag_[j] = alpha;
        }
    }

    std::size_t rows() const noexcept { return qr_.rows(); }
    std::size_t cols() const noexcept { return qr_.cols(); }

    /// Applies Q^T to y in place.
    void apply_qt(std::span<double> y) const {
        const std::size_t n = qr_.rows(), p = qr_.cols();
        for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t i = j; i < n; ++i) s += qr_(i, j) * y[i];
            s *= beta_[j];
            for (std::size_t i = j; i < n; ++i) y[i] -= s * qr_(i, j);
        }
    }

    Vector solve(std::span<const double> y) const {
        if (y.size() != qr_.rows()) {
            throw Error(ErrorKind::dimension, "response length " + std::to_string(y.size()) +
                                                  " does not match " + std::to_string(qr_.rows()) + " rows");
        }
        Vector qty(y.begin(), y.end());
        apply_qt(qty);
        return back_substitute(qty);
    }

    /// (X^T X)^{-1} = R^{-1} R^{-T}.
    DenseMatrix xtx_inverse() const {
        const std::size_t p = qr_.cols();
        DenseMatrix rinv(p, p);
        for (std::size_t c = 0; c < p; ++c) {
            Vector e(p, 0.0);
            e[c] = 1.0;
            Vector col = back_substitute(e);
            rinv.set_col(c, col);
        }
        DenseMatrix out(p, p);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                double s = 0.0;
                for (std::size_t k = std::max(i, j); k < p; ++k) s += rinv(i, k) * rinv(j, k);
                out(i, j) = s;
            }
        return out;
    }

private:
    double r(std::size_t i, std::size_t j) const { return i == j ? diag_[i] : qr_(i, j); }

    Vector back_substitute(std::span<const double> rhs) const {
        const std::size_t p = qr_.cols();
        Vector b(p, 0.0);
        for (std::size_t ii = p; ii-- > 0;) {
            double s = rhs[ii];
            for (std::size_t k = ii + 1; k < p; ++k) s -= r(ii, k) * b[k];
            b[ii] = s / diag_[ii];
        }
        return b;
    }

    DenseMatrix qr_;
    Vector beta_;
    Vector diag_;
};

/// Minimizes ||y - X beta||^2 by Householder QR.
inline Vector least_squares(const DenseMatrix& x, std::span<const double> y) {
    if (x.rows() != y.size()) {
        throw Error(ErrorKind::dimension, "X has " + std::to_string(x.rows()) + " rows but y has " +
                                              std::to_string(y.size()) + " entries");
    }
    return HouseholderQr(x).solve(y);
}

/// Weighted least squares with nonnegative weights, via sqrt(w) row scaling.
inline Vector weighted_least_squares(const DenseMatrix& x, std::span<const double> y, std::span<const double> w) {
    if (x.rows() != y.size() || w.size() != y.size())
        throw Error(ErrorKind::dimension, "weighted least squares length mismatch");
    DenseMatrix xw = x;
    Vector yw(y.begin(), y.end());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double sw = std::sqrt(w[i]);
        for (double& v : xw.row(i)) v *= sw;
        yw[i] *= sw;
    }
    return HouseholderQr(xw).solve(yw);
}

}  // namespace spatialrisk
