#pragma once

// Random forest regression: CART trees grown on bootstrap samples with
// per-node feature subsampling, plus k-fold cross-validation and grid search.
//
// Every random draw comes from a counter-based stream keyed by (seed, tree
// index), so a forest is a pure function of its inputs and trees can be grown
// in any order or in parallel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spatialrisk/error.hpp"
#include "spatialrisk/numkernel.hpp"

namespace spatialrisk {

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Output k is mix64(key + k * golden); the key hashes (seed, stream).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(seed ^ mix64(stream + 0x9E3779B97F4A7C15ULL))) {}

    std::uint64_t next() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform integer in [0, bound), rejection-sampled.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % bound;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Configuration

struct MaxFeatures {
    enum class Kind { all, sqrt, count } kind = Kind::sqrt;
    std::size_t count = 0;

    static MaxFeatures all() { return {Kind::all, 0}; }
    static MaxFeatures sqrt() { return {Kind::sqrt, 0}; }
    static MaxFeatures exactly(std::size_t n) { return {Kind::count, n}; }

    std::size_t resolve(std::size_t n_features) const {
        switch (kind) {
            case Kind::all: return n_features;
            case Kind::sqrt:
                return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
            case Kind::count: return std::clamp<std::size_t>(count, 1, n_features);
        }
        return n_features;
    }

    std::string label() const {
        switch (kind) {
            case Kind::all: return "all";
            case Kind::sqrt: return "sqrt";
            case Kind::count: return std::to_string(count);
        }
        return "?";
    }

    friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

struct ForestConfig {
    std::size_t n_trees = 200;
    std::optional<std::size_t> max_depth = 8;  // nullopt: unlimited; 0: root leaf only
    MaxFeatures max_features = MaxFeatures::sqrt();
    std::size_t min_samples_leaf = 5;
    std::size_t min_samples_split = 5;
    std::uint64_t seed = 0;
    bool bootstrap = true;

    void validate() const {
        if (n_trees < 1) throw Error(ErrorKind::config, "n_trees must be >= 1");
        if (min_samples_split < 2) throw Error(ErrorKind::config, "min_samples_split must be >= 2");
        if (min_samples_leaf < 1) throw Error(ErrorKind::config, "min_samples_leaf must be >= 1");
        if (max_features.kind == MaxFeatures::Kind::count && max_features.count < 1)
            throw Error(ErrorKind::config, "max_features count must be >= 1");
    }

    std::string label() const {
        return "trees=" + std::to_string(n_trees) +
               " depth=" + (max_depth ? std::to_string(*max_depth) : std::string("none")) +
               " features=" + max_features.label() + " leaf=" + std::to_string(min_samples_leaf) +
               " split=" + std::to_string(min_samples_split);
    }

    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// The best configuration reported for the census and component feature sets.
inline ForestConfig published_forest_config(std::uint64_t seed = 0) {
    ForestConfig c;
    c.n_trees = 200;
    c.max_depth = 8;
    c.max_features = MaxFeatures::sqrt();
    c.min_samples_leaf = 5;
    c.min_samples_split = 5;
    c.seed = seed;
    return c;
}

/// trees {100, 200, 400} x depth {4, 8, 16, unlimited} x leaf {1, 5} x split {2, 5} x features {sqrt, all}.
inline std::vector<ForestConfig> default_forest_grid(std::uint64_t seed = 0) {
    std::vector<ForestConfig> grid;
    for (std::size_t trees : {100u, 200u, 400u})
        for (std::optional<std::size_t> depth : {std::optional<std::size_t>(4), std::optional<std::size_t>(8),
                                                 std::optional<std::size_t>(16), std::optional<std::size_t>()})
            for (std::size_t leaf : {1u, 5u})
                for (std::size_t split : {2u, 5u})
                    for (MaxFeatures mf : {MaxFeatures::sqrt(), MaxFeatures::all()}) {
                        ForestConfig c;
                        c.n_trees = trees;
                        c.max_depth = depth;
                        c.min_samples_leaf = leaf;
                        c.min_samples_split = split;
                        c.max_features = mf;
                        c.seed = seed;
                        grid.push_back(c);
                    }
    return grid;
}

// ---------------------------------------------------------------------------
// Trees

struct TreeNode {
    // Internal nodes: feature/threshold/children. Leaves: left == right == npos.
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t feature = npos;
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    std::size_t left = npos;
    std::size_t right = npos;
    double value = 0.0;       // mean target of the training rows reaching this node
    std::size_t samples = 0;
    std::size_t depth = 0;

    bool is_leaf() const noexcept { return left == npos; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> row) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }

    std::size_t depth() const {
        std::size_t d = 0;
        for (const auto& n : nodes) d = std::max(d, n.depth);
        return d;
    }
};

namespace detail {

struct SplitCandidate {
    std::size_t feature = TreeNode::npos;
    double threshold = 0.0;
    double gain = 0.0;
    std::size_t n_left = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const DenseMatrix& x, std::span<const double> y, const ForestConfig& cfg, CounterRng& rng)
        : x_(x), y_(y), cfg_(cfg), rng_(rng), mtry_(cfg.max_features.resolve(x.cols())) {}

    RegressionTree build(std::vector<std::size_t> rows) {
        tree_.nodes.clear();
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
        const std::size_t id = tree_.nodes.size();
        tree_.nodes.emplace_back();
        double sum = 0.0;
        for (auto r : rows) sum += y_[r];
        const double node_mean = sum / static_cast<double>(rows.size());
        tree_.nodes[id].value = node_mean;
        tree_.nodes[id].samples = rows.size();
        tree_.nodes[id].depth = depth;

        const bool depth_ok = !cfg_.max_depth || depth < *cfg_.max_depth;
        if (!depth_ok || rows.size() < cfg_.min_samples_split || rows.size() < 2 * cfg_.min_samples_leaf) return id;

        const SplitCandidate best = find_split(rows, sum);
        if (best.feature == TreeNode::npos) return id;

        std::vector<std::size_t> left, right;
        left.reserve(best.n_left);
        right.reserve(rows.size() - best.n_left);
        for (auto r : rows) (x_(r, best.feature) <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree_.nodes[id].feature = best.feature;
        tree_.nodes[id].threshold = best.threshold;
        const std::size_t l = grow(left, depth + 1);
        tree_.nodes[id].left = l;
        const std::size_t r = grow(right, depth + 1);
        tree_.nodes[id].right = r;
        return id;
    }

    // Exhaustive variance-reduction search over midpoints of sorted unique
    // values of a random subset of features. First strictly best split wins.
    SplitCandidate find_split(const std::vector<std::size_t>& rows, double sum) {
        const std::size_t p = x_.cols();
        features_.resize(p);
        std::iota(features_.begin(), features_.end(), 0);
        // Partial Fisher-Yates: the first mtry_ entries are the sample.
        for (std::size_t i = 0; i < mtry_ && i + 1 < p; ++i) std::swap(features_[i], features_[i + rng_.below(p - i)]);

        const std::size_t n = rows.size();
        const double total_sq = sum * sum / static_cast<double>(n);
        SplitCandidate best;
        double best_score = total_sq;  // sum_left^2/n_left + sum_right^2/n_right must beat this
        const double eps = 1e-12 * std::max(1.0, std::abs(total_sq));
        pairs_.resize(n);
        for (std::size_t k = 0; k < mtry_; ++k) {
            const std::size_t f = features_[k];
            for (std::size_t i = 0; i < n; ++i) pairs_[i] = {x_(rows[i], f), y_[rows[i]]};
            std::sort(pairs_.begin(), pairs_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (pairs_.front().first == pairs_.back().first) continue;
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += pairs_[i].second;
                const std::size_t nl = i + 1, nr = n - nl;
                if (pairs_[i].first == pairs_[i + 1].first) continue;
                if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
                const double right_sum = sum - left_sum;
                const double score = left_sum * left_sum / static_cast<double>(nl) +
                                     right_sum * right_sum / static_cast<double>(nr);
                if (score > best_score + eps) {
                    best_score = score;
                    best.feature = f;
                    best.n_left = nl;
                    double mid = 0.5 * (pairs_[i].first + pairs_[i + 1].first);
                    if (!(mid < pairs_[i + 1].first)) mid = pairs_[i].first;  // adjacent doubles
                    best.threshold = mid;
                    best.gain = score - total_sq;
                }
            }
        }
        return best;
    }

    const DenseMatrix& x_;
    std::span<const double> y_;
    const ForestConfig& cfg_;
    CounterRng& rng_;
    std::size_t mtry_;
    RegressionTree tree_;
    std::vector<std::size_t> features_;
    std::vector<std::pair<double, double>> pairs_;
};

inline void check_xy(const DenseMatrix& x, std::span<const double> y) {
    if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorKind::domain, "empty training data");
    if (x.rows() != y.size()) throw Error(ErrorKind::dimension, "feature rows and targets differ in length");
    if (!x.all_finite()) throw Error(ErrorKind::domain, "features contain missing or non-finite values");
    for (double v : y)
        if (!std::isfinite(v)) throw Error(ErrorKind::domain, "targets contain missing or non-finite values");
}

inline unsigned worker_count(std::size_t jobs) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(hw, jobs));
}

/// Runs job(i) for i in [0, n) over a fixed set of threads. Each job writes
/// only its own slot, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& job, unsigned threads = 0) {
    if (threads == 0) threads = worker_count(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) job(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Single CART tree on the given row multiset.
inline RegressionTree fit_tree(const DenseMatrix& x, std::span<const double> y, const ForestConfig& config,
                               std::vector<std::size_t> rows, CounterRng& rng) {
    detail::TreeBuilder builder(x, y, config, rng);
    return builder.build(std::move(rows));
}

struct ForestModel {
    ForestConfig config;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;
};

/// Tree t draws its bootstrap sample and its feature subsets from CounterRng(seed, t).
inline RegressionTree fit_forest_tree(const DenseMatrix& x, std::span<const double> y, const ForestConfig& config,
                                      std::size_t tree_index) {
    CounterRng rng(config.seed, tree_index);
    const std::size_t n = x.rows();
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
        for (auto& r : rows) r = rng.below(n);
    } else {
        std::iota(rows.begin(), rows.end(), 0);
    }
    return fit_tree(x, y, config, std::move(rows), rng);
}

inline ForestModel fit_forest(const DenseMatrix& x, std::span<const double> y, const ForestConfig& config,
                              unsigned threads = 0) {
    config.validate();
    detail::check_xy(x, y);
    ForestModel model;
    model.config = config;
    model.n_features = x.cols();
    model.trees.resize(config.n_trees);
    detail::parallel_for(config.n_trees, [&](std::size_t t) { model.trees[t] = fit_forest_tree(x, y, config, t); },
                         threads);
    return model;
}

inline Vector predict_forest(const ForestModel& model, const DenseMatrix& x) {
    if (x.cols() != model.n_features)
        throw Error(ErrorKind::schema, "forest trained on " + std::to_string(model.n_features) + " features, got " +
                                           std::to_string(x.cols()));
    Vector out(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        double s = 0.0;
        for (const auto& tree : model.trees) s += tree.predict(row);
        out[i] = s / static_cast<double>(model.trees.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scores

inline double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() < 2)
        throw Error(ErrorKind::domain, "R-squared needs two equal-length vectors of length >= 2");
    const double m = mean(y_true);
    double rss = 0.0, tss = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        rss += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
        tss += (y_true[i] - m) * (y_true[i] - m);
    }
    if (!(tss > 0.0)) throw Error(ErrorKind::degenerate, "R-squared undefined: target has zero variance");
    return 1.0 - rss / tss;
}

inline double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        throw Error(ErrorKind::domain, "RMSE needs two equal-length non-empty vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) s += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    return std::sqrt(s / static_cast<double>(y_true.size()));
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
    std::vector<std::size_t> test_rows;
    std::optional<double> r2;  // empty when undefined on this fold
    double rmse = 0.0;
    std::string error;
};

/// `mean_r2`/`std_r2` summarize the folds with a defined R-squared; the
/// standard deviation uses divisor n (population form).
struct CvResult {
    std::vector<FoldResult> folds;
    Vector out_of_fold;  // prediction for every row from the fold that held it out
    double mean_r2 = std::numeric_limits<double>::quiet_NaN();
    double std_r2 = std::numeric_limits<double>::quiet_NaN();
    double mean_rmse = 0.0;

    Vector per_fold_r2() const {
        Vector v;
        for (const auto& f : folds) v.push_back(f.r2.value_or(std::numeric_limits<double>::quiet_NaN()));
        return v;
    }
    Vector per_fold_rmse() const {
        Vector v;
        for (const auto& f : folds) v.push_back(f.rmse);
        return v;
    }
};

/// Rows shuffled once by `seed`, then cut into k contiguous folds whose sizes
/// differ by at most one (the first n mod k folds are larger).
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::domain, "k-fold needs k >= 2");
    if (k > n) throw Error(ErrorKind::domain, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(seed, 0xF01D5ULL);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

inline void summarize_cv(CvResult& cv) {
    Vector r2;
    double rmse_sum = 0.0;
    for (const auto& f : cv.folds) {
        if (f.r2) r2.push_back(*f.r2);
        rmse_sum += f.rmse;
    }
    cv.mean_rmse = rmse_sum / static_cast<double>(cv.folds.size());
    if (r2.empty()) return;
    cv.mean_r2 = mean(r2);
    double ss = 0.0;
    for (double v : r2) ss += (v - cv.mean_r2) * (v - cv.mean_r2);
    cv.std_r2 = std::sqrt(ss / static_cast<double>(r2.size()));
}

inline CvResult cross_validate(const DenseMatrix& x, std::span<const double> y, const ForestConfig& config,
                               const std::vector<std::vector<std::size_t>>& folds, unsigned threads = 0) {
    config.validate();
    detail::check_xy(x, y);
    CvResult cv;
    cv.out_of_fold.assign(x.rows(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& test : folds) {
        std::vector<char> held(x.rows(), 0);
        for (auto r : test) held[r] = 1;
        std::vector<std::size_t> train;
        for (std::size_t r = 0; r < x.rows(); ++r)
            if (!held[r]) train.push_back(r);
        const DenseMatrix x_train = x.select_rows(train), x_test = x.select_rows(test);
        Vector y_train, y_test;
        for (auto r : train) y_train.push_back(y[r]);
        for (auto r : test) y_test.push_back(y[r]);

        const ForestModel model = fit_forest(x_train, y_train, config, threads);
        const Vector pred = predict_forest(model, x_test);
        for (std::size_t i = 0; i < test.size(); ++i) cv.out_of_fold[test[i]] = pred[i];

        FoldResult fold;
        fold.test_rows = test;
        fold.rmse = rmse(y_test, pred);
        try {
            fold.r2 = r2_score(y_test, pred);
        } catch (const Error& e) {
            fold.error = e.what();
        }
        cv.folds.push_back(std::move(fold));
    }
    summarize_cv(cv);
    return cv;
}

inline CvResult kfold_cv(const DenseMatrix& x, std::span<const double> y, const ForestConfig& config, std::size_t k,
                         std::uint64_t seed, unsigned threads = 0) {
    return cross_validate(x, y, config, kfold_indices(x.rows(), k, seed), threads);
}

struct GridSearchResult {
    std::vector<ForestConfig> grid;
    std::vector<CvResult> per_config_cv;
    std::size_t best_index = 0;

    const ForestConfig& best() const { return grid[best_index]; }
};

/// Lower is simpler: fewer trees, then shallower (unlimited depth is deepest).
inline bool simpler_than(const ForestConfig& a, const ForestConfig& b) {
    if (a.n_trees != b.n_trees) return a.n_trees < b.n_trees;
    const std::size_t da = a.max_depth.value_or(std::numeric_limits<std::size_t>::max());
    const std::size_t db = b.max_depth.value_or(std::numeric_limits<std::size_t>::max());
    return da < db;
}

/// Every configuration is scored on the same folds. Best = highest mean R²;
/// exact ties go to the simpler configuration, then to the earlier entry.
inline GridSearchResult grid_search(const DenseMatrix& x, std::span<const double> y,
                                    const std::vector<ForestConfig>& grid, std::size_t k, std::uint64_t seed) {
    if (grid.empty()) throw Error(ErrorKind::config, "empty hyperparameter grid");
    for (const auto& c : grid) c.validate();
    detail::check_xy(x, y);
    const auto folds = kfold_indices(x.rows(), k, seed);
    GridSearchResult out;
    out.grid = grid;
    out.per_config_cv.resize(grid.size());
    detail::parallel_for(grid.size(),
                         [&](std::size_t i) { out.per_config_cv[i] = cross_validate(x, y, grid[i], folds, 1); });

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double score = out.per_config_cv[i].mean_r2;
        if (std::isnan(score)) continue;
        if (!best) {
            best = i;
            continue;
        }
        const double top = out.per_config_cv[*best].mean_r2;
        if (score > top || (score == top && simpler_than(grid[i], grid[*best]))) best = i;
    }
    if (!best) throw Error(ErrorKind::degenerate, "no configuration produced a defined cross-validated R-squared");
    out.best_index = *best;
    return out;
}

struct TrainTestSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Random holdout of round(test_fraction * n) rows (at least 1, at most n - 1).
inline TrainTestSplit train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorKind::config, "test fraction must lie in (0,1)");
    if (n < 2) throw Error(ErrorKind::domain, "need at least 2 rows to split");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(seed, 0x5E11ULL);
    rng.shuffle(order);
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    TrainTestSplit s;
    s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

}  // namespace spatialrisk
