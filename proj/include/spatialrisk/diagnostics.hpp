#pragma once

// Residual diagnostics for a least-squares fit: Shapiro-Wilk normality,
// Breusch-Pagan heteroskedasticity, Durbin-Watson autocorrelation and
// variance inflation factors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spatialrisk/distributions.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/numkernel.hpp"
#include "spatialrisk/regression.hpp"

namespace spatialrisk {

struct ShapiroWilkResult {
    double w = 0.0;
    double p_value = 0.0;
};

namespace detail {

inline double poly(std::span<const double> cc, double x) {
    double ret = cc[0];
    if (cc.size() > 1) {
        double p = x * cc.back();
        for (std::size_t j = cc.size() - 2; j > 0; --j) p = (p + cc[j]) * x;
        ret += p;
    }
    return ret;
}

}  // namespace detail

/// Royston's AS R94 algorithm. W from the polynomial approximation of the
/// normal-order-statistic coefficients; p from the exact n = 3 formula, the
/// small-sample transform for n <= 11, and the log-normal transform above.
inline ShapiroWilkResult shapiro_wilk(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 3 || n > 5000)
        throw Error(ErrorKind::domain, "Shapiro-Wilk needs 3 <= n <= 5000, got n=" + std::to_string(n));
    Vector x(sample.begin(), sample.end());
    for (double v : x)
        if (!std::isfinite(v)) throw Error(ErrorKind::domain, "sample has non-finite values");
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (!(range > 1e-19 * std::max(1.0, std::abs(x.back()))))
        throw Error(ErrorKind::degenerate, "Shapiro-Wilk sample has zero range");

    static constexpr double g[] = {-2.273, 0.459};
    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};

    const std::size_t half = n / 2;
    const double an = static_cast<double>(n);
    Vector a(half + 1, 0.0);  // 1-based, a[1] pairs with the extreme order statistics
    if (n == 3) {
        a[1] = std::sqrt(0.5);
    } else {
        Vector m(half + 1, 0.0);
        double summ2 = 0.0;
        for (std::size_t i = 1; i <= half; ++i) {
            m[i] = normal_quantile((static_cast<double>(i) - 0.375) / (an + 0.25));
            summ2 += m[i] * m[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = detail::poly(c1, rsn) - m[1] / ssumm2;
        std::size_t i1;
        double fac;
        if (n > 5) {
            i1 = 3;
            const double a2 = -m[2] / ssumm2 + detail::poly(c2, rsn);
            fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[2] = a2;
        } else {
            i1 = 2;
            fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
        }
        a[1] = a1;
        for (std::size_t i = i1; i <= half; ++i) a[i] = -m[i] / fac;
    }

    // W as the squared correlation between the sorted sample and the
    // antisymmetric coefficient vector; 1 - W is formed directly.
    Vector coef(n, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
        coef[i] = -a[i + 1];
        coef[n - 1 - i] = a[i + 1];
    }
    double sx = 0.0, sa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i] / range;
        sa += coef[i];
    }
    sx /= an;
    sa /= an;
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double asa = coef[i] - sa;
        const double xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    ShapiroWilkResult out;
    out.w = 1.0 - w1;

    if (n == 3) {
        constexpr double pi6 = 1.90985931710274;   // 6 / pi
        constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))
        out.p_value = std::clamp(pi6 * (std::asin(std::sqrt(out.w)) - stqr), 0.0, 1.0);
        return out;
    }
    double y = std::log(w1);
    const double xx = std::log(an);
    double mu, sigma;
    if (n <= 11) {
        const double gamma = detail::poly(g, an);
        if (y >= gamma) {
            out.p_value = 1e-99;
            return out;
        }
        y = -std::log(gamma - y);
        mu = detail::poly(c3, an);
        sigma = std::exp(detail::poly(c4, an));
    } else {
        mu = detail::poly(c5, xx);
        sigma = std::exp(detail::poly(c6, xx));
    }
    out.p_value = std::clamp(normal_sf((y - mu) / sigma), 0.0, 1.0);
    return out;
}

struct BreuschPaganResult {
    double lm = 0.0;
    double p_value = 1.0;
    std::size_t df = 0;
};

enum class BreuschPaganVariant {
    studentized,  // Koenker: n * R^2 of e^2 on X
    classic,      // Breusch-Pagan: half the explained sum of squares of e^2 / sigma^2 on X
};

/// `x` must include the intercept column; df = number of non-intercept regressors.
inline BreuschPaganResult breusch_pagan(std::span<const double> residuals, const DenseMatrix& x,
                                        BreuschPaganVariant variant = BreuschPaganVariant::studentized) {
    const std::size_t n = residuals.size();
    if (x.rows() != n) throw Error(ErrorKind::dimension, "residuals and regressors differ in length");
    if (x.cols() < 2) throw Error(ErrorKind::domain, "Breusch-Pagan needs at least one non-intercept regressor");
    Vector u(n);
    double sigma2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = residuals[i] * residuals[i];
        sigma2 += u[i];
    }
    sigma2 /= static_cast<double>(n);
    if (!(sigma2 > 0.0)) throw Error(ErrorKind::degenerate, "all residuals are zero");

    const Vector beta = least_squares(x, u);
    const Vector fitted = multiply(x, beta);
    const double ubar = mean(u);
    double ess = 0.0, tss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ess += (fitted[i] - ubar) * (fitted[i] - ubar);
        tss += (u[i] - ubar) * (u[i] - ubar);
    }
    BreuschPaganResult out;
    out.df = x.cols() - 1;
    if (variant == BreuschPaganVariant::studentized) {
        // Constant squared residuals: nothing to explain.
        out.lm = tss > 1e-24 * ubar * ubar * static_cast<double>(n) ? static_cast<double>(n) * ess / tss : 0.0;
    } else {
        out.lm = 0.5 * ess / (sigma2 * sigma2);
    }
    out.lm = std::max(0.0, out.lm);
    out.p_value = chi2_sf(out.lm, static_cast<double>(out.df));
    return out;
}

inline double durbin_watson(std::span<const double> residuals) {
    if (residuals.size() < 2) throw Error(ErrorKind::domain, "Durbin-Watson needs at least 2 residuals");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        den += residuals[i] * residuals[i];
        if (i > 0) num += (residuals[i] - residuals[i - 1]) * (residuals[i] - residuals[i - 1]);
    }
    if (den == 0.0) throw Error(ErrorKind::degenerate, "all residuals are zero");
    return num / den;
}

/// VIF_j = 1 / (1 - R^2_j), regressing column j on the others plus an
/// intercept. Perfect collinearity yields +infinity for that column.
inline Vector vif(const DenseMatrix& x) {
    const std::size_t p = x.cols();
    if (p < 2) throw Error(ErrorKind::domain, "VIF needs at least 2 regressors");
    Vector out(p);
    for (std::size_t j = 0; j < p; ++j) {
        const Vector target = x.col(j);
        const double tss = sum_squares_about_mean(target);
        if (!(tss > 0.0)) {
            out[j] = std::numeric_limits<double>::infinity();  // constant column is collinear with the intercept
            continue;
        }
        std::vector<std::size_t> others;
        for (std::size_t k = 0; k < p; ++k)
            if (k != j) others.push_back(k);
        // Drop columns that are themselves dependent on earlier ones.
        Vector beta;
        DenseMatrix design;
        for (;;) {
            design = x.select_cols(others).with_intercept();
            try {
                beta = least_squares(design, target);
                break;
            } catch (const SingularityError& e) {
                if (e.column() == 0) throw;
                others.erase(others.begin() + static_cast<std::ptrdiff_t>(e.column() - 1));
            }
        }
        const Vector fitted = multiply(design, beta);
        double rss = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) rss += (target[i] - fitted[i]) * (target[i] - fitted[i]);
        const double one_minus_r2 = rss / tss;
        out[j] = one_minus_r2 <= 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / one_minus_r2;
    }
    return out;
}

struct DiagnosticsReport {
    double shapiro_w = 0.0;
    double shapiro_p = 0.0;
    double bp_lm = 0.0;
    double bp_p = 0.0;
    std::size_t bp_df = 0;
    double dw = 0.0;
    Vector vif;
    std::vector<std::string> vif_terms;
    bool normality_ok = false;
    bool homoskedasticity_ok = false;
    bool autocorrelation_ok = false;
    bool multicollinearity_ok = false;
};

struct DiagnosticsOptions {
    double alpha = 0.05;
    double dw_low = 1.5;
    double dw_high = 2.5;
    double vif_limit = 5.0;
    BreuschPaganVariant bp_variant = BreuschPaganVariant::studentized;
};

/// All four diagnostics for an OLS fit on regressors `x` (without intercept).
inline DiagnosticsReport run_diagnostics(const RegressionFit& fit, const DenseMatrix& x, DiagnosticsOptions opts = {}) {
    DiagnosticsReport d;
    const auto sw = shapiro_wilk(fit.residuals);
    d.shapiro_w = sw.w;
    d.shapiro_p = sw.p_value;
    const auto bp = breusch_pagan(fit.residuals, x.with_intercept(), opts.bp_variant);
    d.bp_lm = bp.lm;
    d.bp_p = bp.p_value;
    d.bp_df = bp.df;
    d.dw = durbin_watson(fit.residuals);
    if (x.cols() >= 2) {
        d.vif = vif(x);
    } else {
        d.vif.assign(x.cols(), 1.0);
    }
    d.vif_terms.assign(fit.terms.begin() + 1, fit.terms.end());
    d.normality_ok = d.shapiro_p >= opts.alpha;
    d.homoskedasticity_ok = d.bp_p >= opts.alpha;
    d.autocorrelation_ok = d.dw >= opts.dw_low && d.dw <= opts.dw_high;
    d.multicollinearity_ok = std::all_of(d.vif.begin(), d.vif.end(), [&](double v) { return v < opts.vif_limit; });
    return d;
}

}  // namespace spatialrisk
