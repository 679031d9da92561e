#pragma once

// Principal component analysis over standardized indicators.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "spatialrisk/error.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/numkernel.hpp"

namespace spatialrisk {

/// Loadings are indicators x components; component k (1-based) is column k-1.
struct PcaModel {
    DenseMatrix loadings;
    Vector eigenvalues;
    Vector explained_ratio;
    std::vector<std::string> indicator_names;
    Vector standardization_means;
    Vector standardization_stds;
    std::size_t rank = 0;
    std::vector<std::string> warnings;

    std::size_t n_components() const noexcept { return eigenvalues.size(); }
};

/// Component scores; `components` holds the 1-based component number of each column.
struct ScoreTable {
    std::vector<std::string> neighborhood_ids;
    std::vector<int> components;
    DenseMatrix scores;

    std::size_t column_of(int component) const {
        auto it = std::find(components.begin(), components.end(), component);
        if (it == components.end())
            throw Error(ErrorKind::range, "component " + std::to_string(component) + " not present in score table");
        return static_cast<std::size_t>(it - components.begin());
    }
};

/// Flips each column so that its entry of largest magnitude is positive.
/// Exact ties in magnitude resolve to the first such row.
inline void apply_sign_convention(DenseMatrix& loadings) {
    for (std::size_t c = 0; c < loadings.cols(); ++c) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < loadings.rows(); ++r)
            if (std::abs(loadings(r, c)) > std::abs(loadings(arg, c))) arg = r;
        if (loadings(arg, c) < 0.0)
            for (std::size_t r = 0; r < loadings.rows(); ++r) loadings(r, c) = -loadings(r, c);
    }
}

inline PcaModel fit_pca(const IndicatorTable& table) {
    if (!table.standardized) throw Error(ErrorKind::state, "PCA requires a standardized indicator table");
    if (table.rows() < table.cols())
        throw Error(ErrorKind::domain, "PCA needs at least as many rows as indicators");
    const DenseMatrix corr = sample_covariance(table.values);
    EigenResult eig = symmetric_eigen(corr);

    PcaModel model;
    model.indicator_names = table.names;
    model.standardization_means = table.col_means;
    model.standardization_stds = table.col_stds;
    model.loadings = std::move(eig.eigenvectors);
    apply_sign_convention(model.loadings);
    model.eigenvalues = std::move(eig.eigenvalues);

    double total = 0.0;
    for (double& l : model.eigenvalues) {
        if (l < 0.0 && l > -1e-12 * static_cast<double>(table.cols())) l = 0.0;  // rounding below zero
        total += l;
    }
    model.explained_ratio.resize(model.eigenvalues.size());
    for (std::size_t k = 0; k < model.eigenvalues.size(); ++k) model.explained_ratio[k] = model.eigenvalues[k] / total;

    const double cutoff = 1e-10 * total;
    model.rank = static_cast<std::size_t>(
        std::count_if(model.eigenvalues.begin(), model.eigenvalues.end(), [&](double l) { return l > cutoff; }));
    if (model.rank < model.eigenvalues.size()) {
        model.warnings.push_back("singular correlation matrix: rank " + std::to_string(model.rank) + " of " +
                                 std::to_string(model.eigenvalues.size()));
    }
    return model;
}

/// scores = Z * loadings, all components.
inline ScoreTable transform(const PcaModel& model, const IndicatorTable& table) {
    if (!table.standardized) throw Error(ErrorKind::state, "transform requires a standardized indicator table");
    if (table.names != model.indicator_names) {
        std::string got, want;
        for (const auto& n : table.names) got += (got.empty() ? "" : ",") + n;
        for (const auto& n : model.indicator_names) want += (want.empty() ? "" : ",") + n;
        throw Error(ErrorKind::schema, "indicator labels [" + got + "] do not match model [" + want + "]");
    }
    ScoreTable out;
    out.neighborhood_ids = table.neighborhood_ids;
    out.components.resize(model.n_components());
    std::iota(out.components.begin(), out.components.end(), 1);
    out.scores = table.values * model.loadings;
    return out;
}

/// Z reconstructed from the full score matrix: scores * loadings^T.
inline DenseMatrix reconstruct(const PcaModel& model, const ScoreTable& scores) {
    DenseMatrix l = model.loadings.select_cols([&] {
        std::vector<std::size_t> cols;
        for (int c : scores.components) cols.push_back(static_cast<std::size_t>(c - 1));
        return cols;
    }());
    return scores.scores * l.transpose();
}

struct VarianceThreshold {
    double value = 0.7;
};

using ComponentSelection = std::variant<std::vector<int>, VarianceThreshold>;

/// Explicit 1-based component lists pass through verbatim after validation;
/// a threshold keeps the smallest prefix whose cumulative ratio reaches it.
inline std::vector<int> select_components(std::span<const double> explained_ratio, const ComponentSelection& sel) {
    const int p = static_cast<int>(explained_ratio.size());
    if (const auto* list = std::get_if<std::vector<int>>(&sel)) {
        if (list->empty()) throw Error(ErrorKind::config, "empty component selection");
        std::set<int> seen;
        for (int c : *list) {
            if (c < 1 || c > p)
                throw Error(ErrorKind::config, "component index " + std::to_string(c) + " outside 1.." + std::to_string(p));
            if (!seen.insert(c).second) throw Error(ErrorKind::config, "component " + std::to_string(c) + " listed twice");
        }
        return *list;
    }
    const double threshold = std::get<VarianceThreshold>(sel).value;
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw Error(ErrorKind::config, "variance threshold must lie in (0,1]");
    std::vector<int> out;
    double cum = 0.0;
    for (int k = 0; k < p; ++k) {
        cum += explained_ratio[static_cast<std::size_t>(k)];
        out.push_back(k + 1);
        if (cum >= threshold - 1e-12) break;
    }
    return out;
}

inline std::vector<int> select_components(const PcaModel& model, const ComponentSelection& sel) {
    return select_components(model.explained_ratio, sel);
}

inline ScoreTable restrict_components(const ScoreTable& scores, const std::vector<int>& components) {
    std::vector<std::size_t> cols;
    for (int c : components) cols.push_back(scores.column_of(c));
    return {scores.neighborhood_ids, components, scores.scores.select_cols(cols)};
}

/// Descending score on `component`; equal scores order by id.
inline std::vector<std::string> top_k_neighborhoods(const ScoreTable& scores, int component, std::size_t k) {
    const std::size_t col = scores.column_of(component);
    const std::size_t n = scores.neighborhood_ids.size();
    if (k < 1 || k > n) throw Error(ErrorKind::range, "k must lie in 1.." + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto cmp = [&](std::size_t a, std::size_t b) {
        const double sa = scores.scores(a, col), sb = scores.scores(b, col);
        if (sa != sb) return sa > sb;
        return scores.neighborhood_ids[a] < scores.neighborhood_ids[b];
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), cmp);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(scores.neighborhood_ids[idx[i]]);
    return out;
}

}  // namespace spatialrisk
