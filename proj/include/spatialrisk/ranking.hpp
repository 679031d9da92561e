#pragma once

// Neighborhood risk rankings and ordinal agreement with observed densities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "spatialrisk/error.hpp"
#include "spatialrisk/forest.hpp"
#include "spatialrisk/keyed.hpp"

namespace spatialrisk {

struct RankingEntry {
    std::string neighborhood_id;
    double raw_prediction = 0.0;
    double normalized_score = 0.0;  // min-max scaled to [0,1]
    std::size_t rank = 0;           // dense, 1 = highest prediction
};

/// Entries ordered by rank, then id.
struct RiskRanking {
    std::vector<RankingEntry> entries;
    std::vector<std::string> warnings;

    KeyedSeries raw() const {
        KeyedSeries s;
        for (const auto& e : entries) {
            s.ids.push_back(e.neighborhood_id);
            s.values.push_back(e.raw_prediction);
        }
        return s;
    }
};

inline RiskRanking build_ranking(const KeyedSeries& predictions) {
    const std::size_t n = predictions.size();
    if (n < 2) throw Error(ErrorKind::domain, "ranking needs at least 2 neighborhoods");
    if (predictions.values.size() != n) throw Error(ErrorKind::dimension, "ids and predictions differ in length");
    for (double v : predictions.values)
        if (!std::isfinite(v)) throw Error(ErrorKind::domain, "predictions must be finite");

    const auto [lo, hi] = std::minmax_element(predictions.values.begin(), predictions.values.end());
    const double min = *lo, max = *hi;
    RiskRanking out;
    if (!(max > min)) out.warnings.push_back("all predictions equal; normalized scores set to 0.5");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (predictions.values[a] != predictions.values[b]) return predictions.values[a] > predictions.values[b];
        return predictions.ids[a] < predictions.ids[b];
    });
    std::size_t rank = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        if (k == 0 || predictions.values[i] != predictions.values[order[k - 1]]) ++rank;
        const double v = predictions.values[i];
        out.entries.push_back({predictions.ids[i], v, max > min ? (v - min) / (max - min) : 0.5, rank});
    }
    return out;
}

/// Average ranks (1 = smallest), ties share the mean of their positions.
inline Vector average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vector ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0 && sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
    return pearson(average_ranks(a), average_ranks(b));
}

struct PairCounts {
    std::uint64_t concordant = 0;
    std::uint64_t discordant = 0;
};

namespace detail {

// Counts strict inversions of v (i < j with v[i] > v[j]) while merge-sorting it.
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

template <class Eq>
std::uint64_t tied_pairs(const std::vector<std::size_t>& sorted, Eq&& same) {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && same(sorted[i], sorted[j])) ++j;
        const std::uint64_t len = j - i;
        t += len * (len - 1) / 2;
        i = j;
    }
    return t;
}

}  // namespace detail

/// Concordant and discordant pair counts in O(n log n) (Knight's method).
/// Pairs tied in either vector count as neither.
inline PairCounts count_pairs(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::dimension, "pair counting needs equal lengths");
    const std::size_t n = a.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return a[i] != a[j] ? a[i] < a[j] : b[i] < b[j]; });
    const std::uint64_t ties_a = detail::tied_pairs(idx, [&](std::size_t i, std::size_t j) { return a[i] == a[j]; });
    const std::uint64_t ties_ab =
        detail::tied_pairs(idx, [&](std::size_t i, std::size_t j) { return a[i] == a[j] && b[i] == b[j]; });
    std::vector<double> seq(n), buf(n);
    for (std::size_t k = 0; k < n; ++k) seq[k] = b[idx[k]];
    const std::uint64_t discordant = detail::count_inversions(seq, buf, 0, n);
    // seq is now sorted, so ties in b are its runs of equal values.
    std::uint64_t ties_b = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && seq[j] == seq[i]) ++j;
        const std::uint64_t len = j - i;
        ties_b += len * (len - 1) / 2;
        i = j;
    }
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    PairCounts out;
    out.discordant = discordant;
    out.concordant = total - ties_a - ties_b + ties_ab - discordant;
    return out;
}

/// 100 * C / (C + D); NaN when every pair is tied.
inline double concordant_pair_pct(std::span<const double> a, std::span<const double> b) {
    const auto c = count_pairs(a, b);
    if (c.concordant + c.discordant == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * static_cast<double>(c.concordant) / static_cast<double>(c.concordant + c.discordant);
}

/// Ids of the k largest values; equal values order by id.
inline std::vector<std::string> top_k_ids(const std::vector<std::string>& ids, std::span<const double> values,
                                          std::size_t k) {
    std::vector<std::size_t> idx(ids.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return values[a] != values[b] ? values[a] > values[b] : ids[a] < ids[b];
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, idx.size()); ++i) out.push_back(ids[idx[i]]);
    return out;
}

struct AgreementReport {
    std::size_t n = 0;
    double spearman_rho = 0.0;
    double concordant_pair_pct = 0.0;
    std::uint64_t concordant_pairs = 0;
    std::uint64_t discordant_pairs = 0;
    std::vector<std::pair<std::size_t, double>> top_k_overlap;  // (k, |top-k pred ∩ top-k obs| / k)
};

inline AgreementReport rank_agreement(const RiskRanking& predicted, const KeyedSeries& observed,
                                      const std::vector<std::size_t>& ks = {5, 10, 20}) {
    const KeyedSeries pred = predicted.raw();
    std::vector<std::string> obs_ids = observed.ids;
    if (pred.size() != observed.size() || [&] {
            auto a = pred.ids, b = obs_ids;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            return a != b;
        }()) {
        throw Error(ErrorKind::join, "neighborhood sets differ: " + describe_symmetric_difference(pred.ids, obs_ids));
    }
    const Vector obs = align_to(pred.ids, observed);

    AgreementReport r;
    r.n = pred.size();
    r.spearman_rho = spearman_rho(pred.values, obs);
    const auto pc = count_pairs(pred.values, obs);
    r.concordant_pairs = pc.concordant;
    r.discordant_pairs = pc.discordant;
    r.concordant_pair_pct = concordant_pair_pct(pred.values, obs);
    for (std::size_t k : ks) {
        if (k > r.n) continue;
        const auto tp = top_k_ids(pred.ids, pred.values, k);
        const auto to = top_k_ids(pred.ids, obs, k);
        std::size_t hit = 0;
        for (const auto& id : tp)
            if (std::find(to.begin(), to.end(), id) != to.end()) ++hit;
        r.top_k_overlap.emplace_back(k, static_cast<double>(hit) / static_cast<double>(k));
    }
    return r;
}

struct PermutationBaseline {
    std::size_t permutations = 0;
    double mean_pct = 0.0;
    double quantile95_pct = 0.0;
    double observed_pct = 0.0;
    double p_value = 1.0;  // (1 + #null >= observed) / (1 + permutations)
};

/// Null distribution of the concordant-pair percentage obtained by randomly
/// permuting the observed values across neighborhoods.
inline PermutationBaseline concordance_permutation_baseline(const RiskRanking& predicted, const KeyedSeries& observed,
                                                            std::size_t permutations, std::uint64_t seed) {
    const KeyedSeries pred = predicted.raw();
    Vector obs = align_to(pred.ids, observed);
    PermutationBaseline out;
    out.permutations = permutations;
    out.observed_pct = concordant_pair_pct(pred.values, obs);
    if (permutations == 0) return out;
    CounterRng rng(seed, 0xBA5EULL);
    Vector null(permutations);
    std::size_t exceed = 0;
    for (std::size_t i = 0; i < permutations; ++i) {
        rng.shuffle(obs);
        null[i] = concordant_pair_pct(pred.values, obs);
        if (null[i] >= out.observed_pct) ++exceed;
    }
    out.mean_pct = mean(null);
    std::sort(null.begin(), null.end());
    // Linear interpolation between order statistics.
    const double pos = 0.95 * static_cast<double>(permutations - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, permutations - 1);
    out.quantile95_pct = null[lo] + (pos - static_cast<double>(lo)) * (null[hi] - null[lo]);
    out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
    return out;
}

}  // namespace spatialrisk
