#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "spatialrisk/pca.hpp"

using namespace spatialrisk;

namespace {

IndicatorTable raw_table(const DenseMatrix& values) {
    IndicatorTable t;
    for (std::size_t i = 0; i < values.rows(); ++i) t.neighborhood_ids.push_back("N" + std::to_string(i));
    for (std::size_t j = 0; j < values.cols(); ++j) t.names.push_back("x" + std::to_string(j));
    t.values = values;
    return t;
}

// Correlated columns so the eigenvalues are well separated.
DenseMatrix correlated(std::size_t n, std::mt19937_64& gen) {
    const DenseMatrix z = oracle::random_matrix(n, 6, gen);
    const DenseMatrix mix = oracle::random_matrix(6, 6, gen);
    return z * mix;
}

}  // namespace

TEST(FitPca, PerfectlyCorrelatedPair) {
    DenseMatrix v(5, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        v(i, 0) = static_cast<double>(i);
        v(i, 1) = 3.0 * static_cast<double>(i) + 1.0;
    }
    const auto m = fit_pca(standardize(raw_table(v)));
    EXPECT_NEAR(m.explained_ratio[0], 1.0, 1e-12);
    EXPECT_NEAR(m.explained_ratio[1], 0.0, 1e-12);
    EXPECT_EQ(m.rank, 1u);
    EXPECT_FALSE(m.warnings.empty());
}

TEST(FitPca, IndependentColumnsShareVarianceEqually) {
    std::mt19937_64 gen(10000);
    const auto m = fit_pca(standardize(raw_table(oracle::random_matrix(10000, 6, gen))));
    for (double r : m.explained_ratio) EXPECT_NEAR(r, 1.0 / 6.0, 0.05);
}

TEST(FitPca, EigenvaluesMatchCharacteristicPolynomial) {
    std::mt19937_64 gen(94);
    const auto z = standardize(raw_table(correlated(94, gen)));
    const auto m = fit_pca(z);
    const Vector roots = oracle::eigenvalues_by_char_poly(sample_covariance(z.values));
    ASSERT_EQ(roots.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(m.eigenvalues[k], roots[k], 1e-6);
}

TEST(FitPca, OrthonormalTraceAndSignConvention) {
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto m = fit_pca(standardize(raw_table(correlated(94, gen))));
        const DenseMatrix ltl = m.loadings.transpose() * m.loadings;
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(ltl(i, j), i == j ? 1.0 : 0.0, 1e-10);
        double sum = 0.0;
        for (double l : m.eigenvalues) sum += l;
        EXPECT_NEAR(sum, 6.0, 1e-9);
        DenseMatrix again = m.loadings;
        apply_sign_convention(again);
        EXPECT_EQ(again, m.loadings);
        for (std::size_t c = 0; c < 6; ++c) {
            double best = 0.0;
            for (std::size_t r = 0; r < 6; ++r)
                if (std::abs(m.loadings(r, c)) > std::abs(best)) best = m.loadings(r, c);
            EXPECT_GT(best, 0.0);
        }
    }
}

TEST(FitPca, ScaleInvariance) {
    std::mt19937_64 gen(17);
    const DenseMatrix v = correlated(60, gen);
    DenseMatrix scaled = v;
    const double factors[6] = {1.0, 1e3, 0.01, 7.5, 1.0, 42.0};
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < 6; ++j) scaled(i, j) *= factors[j];
    const auto za = standardize(raw_table(v)), zb = standardize(raw_table(scaled));
    const auto a = fit_pca(za), b = fit_pca(zb);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(a.eigenvalues[k], b.eigenvalues[k], 1e-9);
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(a.loadings(r, c), b.loadings(r, c), 1e-9);
    const auto sa = transform(a, za), sb = transform(b, zb);
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(sa.scores(i, c), sb.scores(i, c), 1e-9);
}

TEST(FitPca, RequiresStandardizedInput) {
    std::mt19937_64 gen(1);
    try {
        fit_pca(raw_table(oracle::random_matrix(10, 6, gen)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::state);
    }
}

TEST(Transform, MeanRowScoresZero) {
    std::mt19937_64 gen(31);
    DenseMatrix v = correlated(30, gen);
    auto t = raw_table(v);
    const auto z = standardize(t);
    const auto m = fit_pca(z);
    IndicatorTable probe = z;
    probe.values = DenseMatrix(1, 6, 0.0);
    probe.neighborhood_ids = {"MEAN"};
    const auto s = transform(m, probe);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(s.scores(0, c), 0.0);
}

TEST(Transform, FullRoundTrip) {
    std::mt19937_64 gen(32);
    const auto z = standardize(raw_table(correlated(94, gen)));
    const auto m = fit_pca(z);
    const auto s = transform(m, z);
    EXPECT_LE((reconstruct(m, s) - z.values).frobenius_norm(), 1e-8);
}

TEST(Transform, ScoreCovarianceIsDiagonalEigenvalues) {
    std::mt19937_64 gen(33);
    const auto z = standardize(raw_table(correlated(94, gen)));
    const auto m = fit_pca(z);
    const auto s = transform(m, z);
    // Direct covariance of the score columns.
    for (std::size_t a = 0; a < 6; ++a)
        for (std::size_t b = 0; b < 6; ++b) {
            double ma = 0, mb = 0, cov = 0;
            for (std::size_t i = 0; i < 94; ++i) ma += s.scores(i, a), mb += s.scores(i, b);
            ma /= 94;
            mb /= 94;
            for (std::size_t i = 0; i < 94; ++i) cov += (s.scores(i, a) - ma) * (s.scores(i, b) - mb);
            cov /= 93;
            EXPECT_NEAR(cov, a == b ? m.eigenvalues[a] : 0.0, 1e-6);
        }
}

TEST(Transform, LabelMismatchIsSchemaError) {
    std::mt19937_64 gen(34);
    auto z = standardize(raw_table(correlated(20, gen)));
    const auto m = fit_pca(z);
    std::swap(z.names[0], z.names[1]);
    try {
        transform(m, z);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::schema);
    }
}

TEST(SelectComponents, ExplicitListPassesThrough) {
    const Vector ratio(6, 1.0 / 6.0);
    EXPECT_EQ(select_components(ratio, std::vector<int>{1, 2, 4, 5, 6}), (std::vector<int>{1, 2, 4, 5, 6}));
    for (auto bad : {std::vector<int>{7}, std::vector<int>{0}, std::vector<int>{2, 2}, std::vector<int>{}}) {
        try {
            select_components(ratio, bad);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::config);
        }
    }
}

TEST(SelectComponents, Threshold) {
    const Vector ratio(6, 1.0 / 6.0);
    EXPECT_EQ(select_components(ratio, VarianceThreshold{1.0}).size(), 6u);

    const Vector eig = {3, 1, 1, 0.5, 0.3, 0.2};
    Vector r;
    for (double l : eig) r.push_back(l / 6.0);
    // Cumulative-sum oracle: smallest prefix reaching the threshold.
    std::size_t expect = 0;
    for (double cum = 0.0; cum < 0.70 - 1e-12; ++expect) cum += r[expect];
    EXPECT_EQ(expect, 3u);
    EXPECT_EQ(select_components(r, VarianceThreshold{0.70}), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(select_components(r, VarianceThreshold{0.5}), (std::vector<int>{1}));
}

TEST(TopK, TiesAndFullOrdering) {
    ScoreTable s{{"B", "A", "C"}, {1}, DenseMatrix{{2}, {2}, {1}}};
    EXPECT_EQ(top_k_neighborhoods(s, 1, 2), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(top_k_neighborhoods(s, 1, 3), (std::vector<std::string>{"A", "B", "C"}));
}

TEST(TopK, MatchesFullSortPrefix) {
    std::mt19937_64 gen(55);
    const auto z = standardize(raw_table(correlated(94, gen)));
    const auto s = transform(fit_pca(z), z);
    for (int comp = 1; comp <= 6; ++comp) {
        std::vector<std::pair<double, std::string>> all;
        for (std::size_t i = 0; i < 94; ++i) all.emplace_back(-s.scores(i, comp - 1), s.neighborhood_ids[i]);
        std::sort(all.begin(), all.end());
        const auto got = top_k_neighborhoods(s, comp, 5);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(got[k], all[k].second);
    }
}
