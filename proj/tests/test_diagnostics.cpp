#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "reference.hpp"
#include "spatialrisk/diagnostics.hpp"
#include "spatialrisk/distributions.hpp"

using namespace spatialrisk;

TEST(ShapiroWilk, MatchesReference) {
    const auto cases = reference::load_diagnostics();
    ASSERT_EQ(cases.size(), 20u);
    for (const auto& c : cases) {
        const auto r = shapiro_wilk(c.sample);
        EXPECT_NEAR(r.w, c.shapiro_w, 1e-4) << c.name;
        EXPECT_NEAR(r.p_value, c.shapiro_p, 1e-4) << c.name;
    }
}

TEST(ShapiroWilk, NormalQuantileSampleLooksNormal) {
    Vector x;
    for (int i = 1; i <= 50; ++i) x.push_back(normal_quantile((i - 0.375) / 50.25));
    const auto r = shapiro_wilk(x);
    EXPECT_GT(r.w, 0.99);
    EXPECT_GT(r.p_value, 0.5);
}

TEST(ShapiroWilk, ExponentialSampleRejected) {
    std::mt19937_64 gen(100);
    std::exponential_distribution<double> ex(1.0);
    Vector x(100);
    for (auto& v : x) v = ex(gen);
    EXPECT_LT(shapiro_wilk(x).p_value, 0.01);
}

TEST(ShapiroWilk, SignFlipAndErrors) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    Vector x(40), neg(40);
    for (std::size_t i = 0; i < 40; ++i) neg[i] = -(x[i] = nd(gen));
    EXPECT_NEAR(shapiro_wilk(x).w, shapiro_wilk(neg).w, 1e-12);
    try {
        shapiro_wilk(Vector(10, 2.5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate);
    }
    EXPECT_THROW(shapiro_wilk(Vector{1.0, 2.0}), Error);
}

TEST(BreuschPagan, MatchesReference) {
    std::size_t checked = 0;
    for (const auto& c : reference::load_diagnostics()) {
        if (!c.bp) continue;
        ++checked;
        const auto k = breusch_pagan(c.bp->residuals, c.bp->exog);
        EXPECT_NEAR(k.lm, c.bp->lm, 1e-6) << c.name;
        EXPECT_NEAR(k.p_value, c.bp->p, 1e-6) << c.name;
        const auto cl = breusch_pagan(c.bp->residuals, c.bp->exog, BreuschPaganVariant::classic);
        EXPECT_NEAR(cl.lm, c.bp->classic_lm, 1e-6) << c.name;
        EXPECT_NEAR(cl.p_value, c.bp->classic_p, 1e-6) << c.name;
    }
    EXPECT_EQ(checked, 15u);
}

TEST(BreuschPagan, ConstantMagnitudeResiduals) {
    std::mt19937_64 gen(1);
    DenseMatrix x = oracle::random_matrix(30, 2, gen).with_intercept();
    Vector r(30);
    for (std::size_t i = 0; i < 30; ++i) r[i] = i % 3 ? 1.5 : -1.5;
    const auto bp = breusch_pagan(r, x);
    EXPECT_NEAR(bp.lm, 0.0, 1e-12);
    EXPECT_NEAR(bp.p_value, 1.0, 1e-12);
}

TEST(BreuschPagan, DetectsVarianceProportionalToRegressor) {
    std::mt19937_64 gen(500);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::normal_distribution<double> nd;
    DenseMatrix x(500, 1);
    Vector r(500);
    for (std::size_t i = 0; i < 500; ++i) {
        x(i, 0) = u(gen);
        r[i] = std::sqrt(x(i, 0)) * nd(gen) * x(i, 0);
    }
    EXPECT_LT(breusch_pagan(r, x.with_intercept()).p_value, 0.01);
}

TEST(BreuschPagan, SizeUnderNull) {
    std::mt19937_64 gen(20);
    std::normal_distribution<double> nd;
    int rejections = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const DenseMatrix x = oracle::random_matrix(20, 2, gen).with_intercept();
        Vector r(20);
        for (auto& v : r) v = nd(gen);
        const auto bp = breusch_pagan(r, x);
        EXPECT_GE(bp.p_value, 0.0);
        EXPECT_LE(bp.p_value, 1.0);
        if (bp.p_value < 0.05) ++rejections;
    }
    EXPECT_GE(rejections / 1000.0, 0.02);
    EXPECT_LE(rejections / 1000.0, 0.09);
}

TEST(DurbinWatson, ClosedForms) {
    EXPECT_DOUBLE_EQ(durbin_watson(Vector(8, 3.0)), 0.0);
    for (std::size_t n : {2u, 5u, 10u, 101u}) {
        Vector r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = i % 2 ? -1.0 : 1.0;
        EXPECT_NEAR(durbin_watson(r), 4.0 * static_cast<double>(n - 1) / static_cast<double>(n), 1e-12);
    }
}

TEST(DurbinWatson, IidNoiseNearTwo) {
    std::mt19937_64 gen(1000);
    std::normal_distribution<double> nd;
    Vector r(1000), neg(1000);
    for (std::size_t i = 0; i < 1000; ++i) neg[i] = -(r[i] = nd(gen));
    const double dw = durbin_watson(r);
    EXPECT_GE(dw, 1.8);
    EXPECT_LE(dw, 2.2);
    EXPECT_DOUBLE_EQ(dw, durbin_watson(neg));
}

TEST(Vif, OrthogonalCenteredColumns) {
    // Columns of a 2-level full factorial design are exactly orthogonal and centered.
    DenseMatrix x(8, 3);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = (i >> j) & 1 ? 1.0 : -1.0;
    for (double v : vif(x)) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(Vif, DuplicatedColumnIsInfinite) {
    std::mt19937_64 gen(2);
    DenseMatrix x = oracle::random_matrix(20, 3, gen);
    x.set_col(2, x.col(0));
    const Vector v = vif(x);
    EXPECT_TRUE(std::isinf(v[0]));
    EXPECT_TRUE(std::isinf(v[2]));
    EXPECT_TRUE(std::isfinite(v[1]));
}

TEST(Vif, MatchesAuxiliaryRegressionOracle) {
    std::mt19937_64 gen(12);
    DenseMatrix x = oracle::random_matrix(50, 3, gen);
    for (std::size_t i = 0; i < 50; ++i) x(i, 2) += 0.8 * x(i, 0);
    const Vector v = vif(x);
    for (std::size_t j = 0; j < 3; ++j) {
        std::vector<std::size_t> others;
        for (std::size_t k = 0; k < 3; ++k)
            if (k != j) others.push_back(k);
        const DenseMatrix d = x.select_cols(others).with_intercept();
        const Vector target = x.col(j);
        const Vector b = oracle::normal_equations(d, target);
        double m = 0, rss = 0, tss = 0;
        for (double t : target) m += t / 50.0;
        for (std::size_t i = 0; i < 50; ++i) {
            double f = 0;
            for (std::size_t k = 0; k < d.cols(); ++k) f += d(i, k) * b[k];
            rss += (target[i] - f) * (target[i] - f);
            tss += (target[i] - m) * (target[i] - m);
        }
        EXPECT_NEAR(v[j], tss / rss, 1e-9);
    }
}
