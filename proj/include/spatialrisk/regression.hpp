#pragma once

// Ordinary least squares and Huber M-estimation (IRLS with MAD scale) of case
// density on component scores.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spatialrisk/distributions.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/keyed.hpp"
#include "spatialrisk/numkernel.hpp"
#include "spatialrisk/pca.hpp"

namespace spatialrisk {

enum class ModelKind { ols, huber };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::ols ? "OLS" : "Huber"; }

struct RegressionFit {
    ModelKind kind = ModelKind::ols;
    std::vector<std::string> terms;  // "Intercept" then one per regressor
    std::vector<int> components;     // 1-based component number of each regressor, when fitted on scores
    Vector coefficients;
    Vector std_errors;
    Vector test_stats;  // t for OLS, z for Huber
    Vector p_values;
    Vector ci_lower;
    Vector ci_upper;
    Vector fitted;
    Vector residuals;
    Vector weights;  // final IRLS weights (Huber), all ones for OLS
    double scale = 0.0;  // sigma-hat (OLS) or MAD-based s (Huber)
    std::size_t n_obs = 0;
    std::size_t df_resid = 0;
    double critical_value = 0.0;  // multiplier used for the 95% intervals
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    double adj_r_squared = std::numeric_limits<double>::quiet_NaN();
    double pseudo_r_squared = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = true;
    std::vector<std::string> warnings;
};

struct HuberConfig {
    double tuning_constant = 1.345;
    int max_iterations = 50;
    double tolerance = 1e-8;  // max |delta beta| relative to max |beta|

    void validate() const {
        if (!(tuning_constant > 0.0)) throw Error(ErrorKind::config, "Huber tuning constant must be positive");
        if (!(tolerance > 0.0)) throw Error(ErrorKind::config, "Huber tolerance must be positive");
        if (max_iterations < 1) throw Error(ErrorKind::config, "Huber max_iterations must be >= 1");
    }
};

inline constexpr double kMadConsistency = 0.6745;

namespace detail {

inline std::vector<std::string> default_terms(std::size_t p) {
    std::vector<std::string> t{"Intercept"};
    for (std::size_t j = 0; j < p; ++j) t.push_back("x" + std::to_string(j + 1));
    return t;
}

inline void fill_fit_values(RegressionFit& fit, const DenseMatrix& design, std::span<const double> y) {
    fit.fitted = multiply(design, fit.coefficients);
    fit.residuals.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) fit.residuals[i] = y[i] - fit.fitted[i];
}

inline double stat_ratio(double coef, double se) {
    if (se > 0.0) return coef / se;
    if (coef == 0.0) return 0.0;
    return coef > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

inline void check_inputs(const DenseMatrix& x, std::span<const double> y) {
    if (x.rows() != y.size())
        throw Error(ErrorKind::dimension, "regressors have " + std::to_string(x.rows()) + " rows, response has " +
                                              std::to_string(y.size()));
    if (x.rows() <= x.cols() + 1)
        throw Error(ErrorKind::domain, "need more than p+1 observations (n=" + std::to_string(x.rows()) +
                                           ", p=" + std::to_string(x.cols()) + ")");
    for (double v : y)
        if (!std::isfinite(v)) throw Error(ErrorKind::domain, "response has non-finite values");
}

}  // namespace detail

/// Median absolute deviation about the median, divided by 0.6745.
inline double mad_scale(std::span<const double> r) {
    const double med = median(Vector(r.begin(), r.end()));
    Vector dev(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) dev[i] = std::abs(r[i] - med);
    return median(std::move(dev)) / kMadConsistency;
}

inline double sum_squares_about_mean(std::span<const double> y) {
    const double m = mean(y);
    double s = 0.0;
    for (double v : y) s += (v - m) * (v - m);
    return s;
}

/// `x` holds the regressors without the intercept column.
inline RegressionFit fit_ols(const DenseMatrix& x, std::span<const double> y, std::vector<std::string> terms = {}) {
    detail::check_inputs(x, y);
    const std::size_t n = x.rows(), p = x.cols();
    const DenseMatrix design = x.with_intercept();
    const HouseholderQr qr(design);

    RegressionFit fit;
    fit.kind = ModelKind::ols;
    fit.terms = terms.empty() ? detail::default_terms(p) : std::move(terms);
    fit.coefficients = qr.solve(y);
    detail::fill_fit_values(fit, design, y);
    fit.weights.assign(n, 1.0);
    fit.n_obs = n;
    fit.df_resid = n - p - 1;

    double rss = 0.0;
    for (double r : fit.residuals) rss += r * r;
    const double sigma2 = rss / static_cast<double>(fit.df_resid);
    fit.scale = std::sqrt(sigma2);

    const DenseMatrix xtx_inv = qr.xtx_inverse();
    const double df = static_cast<double>(fit.df_resid);
    fit.critical_value = t_quantile(0.975, df);
    for (std::size_t j = 0; j <= p; ++j) {
        const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
        const double t = detail::stat_ratio(fit.coefficients[j], se);
        fit.std_errors.push_back(se);
        fit.test_stats.push_back(t);
        fit.p_values.push_back(std::min(1.0, 2.0 * t_sf(std::abs(t), df)));
        fit.ci_lower.push_back(fit.coefficients[j] - fit.critical_value * se);
        fit.ci_upper.push_back(fit.coefficients[j] + fit.critical_value * se);
    }

    const double tss = sum_squares_about_mean(y);
    if (tss > 0.0) {
        fit.r_squared = 1.0 - rss / tss;
        fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * static_cast<double>(n - 1) / df;
    } else {
        fit.warnings.push_back("response has zero variance; R-squared undefined");
    }
    return fit;
}

/// 1 - sum (y - fitted)^2 / sum (y - mean y)^2 on the fit's own fitted values.
inline double pseudo_r2(const RegressionFit& fit, std::span<const double> y) {
    if (fit.fitted.size() != y.size()) throw Error(ErrorKind::dimension, "fit and response lengths differ");
    const double tss = sum_squares_about_mean(y);
    if (!(tss > 0.0)) throw Error(ErrorKind::degenerate, "response has zero total variance");
    double rss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) rss += (y[i] - fit.fitted[i]) * (y[i] - fit.fitted[i]);
    return 1.0 - rss / tss;
}

inline double huber_psi(double u, double c) { return std::clamp(u, -c, c); }

inline double huber_weight(double u, double c) {
    const double a = std::abs(u);
    return a <= c ? 1.0 : c / a;
}

/// IRLS from the OLS start. Scale is re-estimated by MAD every iteration.
/// Reaching the iteration cap leaves a warning on the fit instead of throwing.
inline RegressionFit fit_huber(const DenseMatrix& x, std::span<const double> y, const HuberConfig& config = {},
                               std::vector<std::string> terms = {}) {
    config.validate();
    detail::check_inputs(x, y);
    const std::size_t n = x.rows(), p = x.cols();
    const DenseMatrix design = x.with_intercept();
    const double c = config.tuning_constant;

    Vector beta = HouseholderQr(design).solve(y);
    Vector r(n), w(n, 1.0);
    auto update_residuals = [&] {
        const Vector f = multiply(design, beta);
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - f[i];
    };
    auto current_scale = [&] {
        const double s = mad_scale(r);
        double ymax = 0.0;
        for (double v : y) ymax = std::max(ymax, std::abs(v));
        if (!(s > 1e-14 * std::max(1.0, ymax)))
            throw Error(ErrorKind::degenerate, "MAD residual scale is zero (more than half the residuals coincide)");
        return s;
    };

    RegressionFit fit;
    fit.kind = ModelKind::huber;
    fit.converged = false;
    for (int it = 1; it <= config.max_iterations; ++it) {
        update_residuals();
        const double s = current_scale();
        for (std::size_t i = 0; i < n; ++i) w[i] = huber_weight(r[i] / s, c);
        Vector next = weighted_least_squares(design, y, w);
        double change = 0.0, size = 0.0;
        for (std::size_t j = 0; j <= p; ++j) {
            change = std::max(change, std::abs(next[j] - beta[j]));
            size = std::max(size, std::abs(next[j]));
        }
        beta = std::move(next);
        fit.iterations = it;
        if (change <= config.tolerance * std::max(size, std::numeric_limits<double>::min())) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        fit.warnings.push_back("IRLS did not converge in " + std::to_string(config.max_iterations) + " iterations");
    }

    fit.terms = terms.empty() ? detail::default_terms(p) : std::move(terms);
    fit.coefficients = beta;
    detail::fill_fit_values(fit, design, y);
    r = fit.residuals;
    fit.scale = current_scale();
    fit.n_obs = n;
    fit.df_resid = n - p - 1;
    fit.weights.resize(n);
    double psi2 = 0.0, dpsi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = r[i] / fit.scale;
        fit.weights[i] = huber_weight(u, c);
        psi2 += huber_psi(u, c) * huber_psi(u, c);
        dpsi += std::abs(u) <= c ? 1.0 : 0.0;
    }
    psi2 /= static_cast<double>(n);
    dpsi /= static_cast<double>(n);
    if (dpsi == 0.0) throw Error(ErrorKind::degenerate, "no residual inside the Huber threshold");

    const DenseMatrix xtx_inv = HouseholderQr(design).xtx_inverse();
    const double factor = fit.scale * fit.scale * psi2 / (dpsi * dpsi);
    fit.critical_value = normal_quantile(0.975);
    for (std::size_t j = 0; j <= p; ++j) {
        const double se = std::sqrt(std::max(0.0, factor * xtx_inv(j, j)));
        const double z = detail::stat_ratio(fit.coefficients[j], se);
        fit.std_errors.push_back(se);
        fit.test_stats.push_back(z);
        fit.p_values.push_back(std::min(1.0, 2.0 * normal_sf(std::abs(z))));
        fit.ci_lower.push_back(fit.coefficients[j] - fit.critical_value * se);
        fit.ci_upper.push_back(fit.coefficients[j] + fit.critical_value * se);
    }
    if (sum_squares_about_mean(y) > 0.0) fit.pseudo_r_squared = pseudo_r2(fit, y);
    return fit;
}

namespace detail {

inline std::vector<std::string> component_terms(const std::vector<int>& components) {
    std::vector<std::string> t{"Intercept"};
    for (int c : components) t.push_back("Component " + std::to_string(c));
    return t;
}

}  // namespace detail

inline RegressionFit fit_ols(const ScoreTable& scores, const KeyedSeries& y) {
    const Vector aligned = align_to(scores.neighborhood_ids, y);
    RegressionFit fit = fit_ols(scores.scores, aligned, detail::component_terms(scores.components));
    fit.components = scores.components;
    return fit;
}

inline RegressionFit fit_huber(const ScoreTable& scores, const KeyedSeries& y, const HuberConfig& config = {}) {
    const Vector aligned = align_to(scores.neighborhood_ids, y);
    RegressionFit fit = fit_huber(scores.scores, aligned, config, detail::component_terms(scores.components));
    fit.components = scores.components;
    return fit;
}

/// intercept + x * beta for raw regressor rows.
inline Vector predict(const RegressionFit& fit, const DenseMatrix& x) {
    if (x.cols() + 1 != fit.coefficients.size())
        throw Error(ErrorKind::schema, "prediction matrix has " + std::to_string(x.cols()) + " columns, fit has " +
                                           std::to_string(fit.coefficients.size() - 1) + " regressors");
    Vector out(x.rows(), fit.coefficients[0]);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out[i] += x(i, j) * fit.coefficients[j + 1];
    return out;
}

/// Picks the fit's components out of `scores` by component number.
inline KeyedSeries predict(const RegressionFit& fit, const ScoreTable& scores) {
    if (fit.components.size() + 1 != fit.coefficients.size())
        throw Error(ErrorKind::schema, "fit carries no component mapping");
    std::vector<std::size_t> cols;
    for (int c : fit.components) {
        auto it = std::find(scores.components.begin(), scores.components.end(), c);
        if (it == scores.components.end())
            throw Error(ErrorKind::schema, "score table lacks component " + std::to_string(c));
        cols.push_back(static_cast<std::size_t>(it - scores.components.begin()));
    }
    return {scores.neighborhood_ids, predict(fit, scores.scores.select_cols(cols))};
}

}  // namespace spatialrisk
