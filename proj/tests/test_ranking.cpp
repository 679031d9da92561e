#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "spatialrisk/ranking.hpp"

using namespace spatialrisk;

namespace {

KeyedSeries series(const std::vector<double>& values, const std::string& prefix = "N") {
    KeyedSeries s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "%s%03zu", prefix.c_str(), i);
        s.ids.push_back(id);
        s.values.push_back(values[i]);
    }
    return s;
}

Vector random_values(std::size_t n, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    Vector v(n);
    for (auto& x : v) x = nd(gen);
    return v;
}

}  // namespace

TEST(BuildRanking, TwoPoints) {
    const auto r = build_ranking({{"A", "B"}, {10.0, 20.0}});
    ASSERT_EQ(r.entries.size(), 2u);
    EXPECT_EQ(r.entries[0].neighborhood_id, "B");
    EXPECT_EQ(r.entries[0].normalized_score, 1.0);
    EXPECT_EQ(r.entries[0].rank, 1u);
    EXPECT_EQ(r.entries[1].neighborhood_id, "A");
    EXPECT_EQ(r.entries[1].normalized_score, 0.0);
    EXPECT_EQ(r.entries[1].rank, 2u);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(BuildRanking, AllEqual) {
    const auto r = build_ranking({{"A", "B", "C"}, {3.0, 3.0, 3.0}});
    for (const auto& e : r.entries) {
        EXPECT_EQ(e.normalized_score, 0.5);
        EXPECT_EQ(e.rank, 1u);
    }
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(BuildRanking, DenseRanksMatchSortOracle) {
    std::mt19937_64 gen(94);
    Vector v = random_values(94, gen);
    for (std::size_t i = 0; i < 94; i += 7) v[i] = std::round(v[i]);  // some ties
    const auto s = series(v);
    const auto r = build_ranking(s);
    Vector distinct = v;
    std::sort(distinct.rbegin(), distinct.rend());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    for (const auto& e : r.entries) {
        const auto i = static_cast<std::size_t>(std::stoi(e.neighborhood_id.substr(1)));
        const auto expected = static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), v[i]) - distinct.begin()) + 1;
        EXPECT_EQ(e.rank, expected);
        EXPECT_NEAR(e.normalized_score, (v[i] - *lo) / (*hi - *lo), 1e-15);
    }
}

TEST(RankAgreement, Identity) {
    std::mt19937_64 gen(1);
    const auto s = series(random_values(30, gen));
    const auto a = rank_agreement(build_ranking(s), s);
    EXPECT_NEAR(a.spearman_rho, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(a.concordant_pair_pct, 100.0);
    for (const auto& [k, overlap] : a.top_k_overlap) EXPECT_DOUBLE_EQ(overlap, 1.0) << k;
    EXPECT_EQ(a.top_k_overlap.size(), 3u);
}

TEST(RankAgreement, Reversal) {
    std::mt19937_64 gen(2);
    const auto s = series(random_values(30, gen));
    KeyedSeries rev = s;
    for (auto& v : rev.values) v = -v;
    const auto a = rank_agreement(build_ranking(s), rev);
    EXPECT_NEAR(a.spearman_rho, -1.0, 1e-12);
    EXPECT_DOUBLE_EQ(a.concordant_pair_pct, 0.0);
}

TEST(RankAgreement, SingleTransposition) {
    const auto pred = series({5, 4, 3, 2, 1});
    const auto obs = series({5, 3, 4, 2, 1});
    const auto [c, d] = oracle::brute_force_pairs(pred.values, obs.values);
    EXPECT_EQ(c, 9u);
    EXPECT_EQ(d, 1u);
    EXPECT_DOUBLE_EQ(rank_agreement(build_ranking(pred), obs).concordant_pair_pct, 90.0);
}

TEST(RankAgreement, MismatchedIdsIsJoinError) {
    const auto pred = series({1, 2, 3});
    auto obs = pred;
    obs.ids[2] = "OTHER";
    try {
        rank_agreement(build_ranking(pred), obs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::join);
    }
}

TEST(RankAgreement, InvariantUnderIncreasingTransform) {
    std::mt19937_64 gen(3);
    const auto pred = series(random_values(50, gen));
    const auto obs = series(random_values(50, gen));
    KeyedSeries warped = pred;
    for (auto& v : warped.values) v = std::exp(3.0 * v) + 7.0;
    const auto a = rank_agreement(build_ranking(pred), obs), b = rank_agreement(build_ranking(warped), obs);
    EXPECT_NEAR(a.spearman_rho, b.spearman_rho, 1e-12);
    EXPECT_EQ(a.concordant_pairs, b.concordant_pairs);
    EXPECT_EQ(a.top_k_overlap, b.top_k_overlap);
    const auto ra = build_ranking(pred), rb = build_ranking(warped);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(ra.entries[i].rank, rb.entries[i].rank);
}

TEST(RankAgreement, Symmetric) {
    std::mt19937_64 gen(4);
    const auto a = series(random_values(40, gen)), b = series(random_values(40, gen));
    EXPECT_DOUBLE_EQ(rank_agreement(build_ranking(a), b).concordant_pair_pct,
                     rank_agreement(build_ranking(b), a).concordant_pair_pct);
}

TEST(CountPairs, MatchesBruteForceWithTies) {
    std::mt19937_64 gen(200);
    std::uniform_int_distribution<int> small(0, 6);
    for (std::size_t n : {2u, 3u, 10u, 57u, 200u}) {
        for (int rep = 0; rep < 5; ++rep) {
            Vector a(n), b(n);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = rep % 2 ? small(gen) : std::normal_distribution<double>()(gen);
                b[i] = small(gen);
            }
            const auto pc = count_pairs(a, b);
            const auto [c, d] = oracle::brute_force_pairs(a, b);
            EXPECT_EQ(pc.concordant, c) << n;
            EXPECT_EQ(pc.discordant, d) << n;
        }
    }
}

TEST(Spearman, AverageRanksForTies) {
    EXPECT_EQ(average_ranks(Vector{10, 20, 20, 5}), (Vector{2, 3.5, 3.5, 1}));
    const Vector a = {1, 2, 3, 4}, b = {1, 3, 2, 4};
    EXPECT_NEAR(spearman_rho(a, b), 1.0 - 6.0 * 2.0 / (4.0 * 15.0), 1e-12);
}

TEST(PermutationBaseline, NullCentredNearFifty) {
    std::mt19937_64 gen(5);
    const auto pred = series(random_values(60, gen));
    const auto base = concordance_permutation_baseline(build_ranking(pred), pred, 500, 7);
    EXPECT_DOUBLE_EQ(base.observed_pct, 100.0);
    EXPECT_NEAR(base.mean_pct, 50.0, 2.0);
    EXPECT_GT(base.quantile95_pct, 50.0);
    EXPECT_LT(base.quantile95_pct, 70.0);
    EXPECT_DOUBLE_EQ(base.p_value, 1.0 / 501.0);
    const auto again = concordance_permutation_baseline(build_ranking(pred), pred, 500, 7);
    EXPECT_EQ(base.quantile95_pct, again.quantile95_pct);
}
