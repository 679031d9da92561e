#pragma once

// End-to-end run over one output directory. Each stage reads its inputs from
// the files earlier stages persisted, so any stage can be rerun on its own and
// the report is rebuilt from those files without refitting anything.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "spatialrisk/choropleth.hpp"
#include "spatialrisk/config.hpp"
#include "spatialrisk/diagnostics.hpp"
#include "spatialrisk/forest.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/pca.hpp"
#include "spatialrisk/ranking.hpp"
#include "spatialrisk/regression.hpp"
#include "spatialrisk/tables.hpp"

namespace spatialrisk {

/// File names inside the output directory.
namespace artifact {
inline constexpr const char* run_config = "run_config.json";
inline constexpr const char* warnings = "warnings.log";
inline constexpr const char* census_records = "census_records.csv";
inline constexpr const char* indicators = "indicators.csv";
inline constexpr const char* indicators_std = "indicators_standardized.csv";
inline constexpr const char* standardization = "standardization.csv";
inline constexpr const char* case_density = "case_density_by_year.csv";
inline constexpr const char* case_rejects = "case_rejects.csv";
inline constexpr const char* target = "target_density.csv";
inline constexpr const char* observed = "observed_density.csv";
inline constexpr const char* pca_loadings = "pca_loadings.csv";
inline constexpr const char* pca_variance = "pca_variance.csv";
inline constexpr const char* pca_scores = "pca_scores.csv";
inline constexpr const char* pca_top = "pca_top10.csv";
inline constexpr const char* selection = "selected_components.csv";
inline constexpr const char* ols_summary = "ols_summary.csv";
inline constexpr const char* ols_fit = "ols_fit.csv";
inline constexpr const char* ols_predictions = "ols_predictions.csv";
inline constexpr const char* diagnostics = "diagnostics.csv";
inline constexpr const char* vif = "vif.csv";
inline constexpr const char* rlm_summary = "rlm_summary.csv";
inline constexpr const char* rlm_fit = "rlm_fit.csv";
inline constexpr const char* rlm_predictions = "rlm_predictions.csv";
inline constexpr const char* rlm_weights = "rlm_weights.csv";
inline constexpr const char* forest_grid = "forest_grid.csv";
inline constexpr const char* forest_cv = "forest_cv_folds.csv";
inline constexpr const char* forest_holdout = "forest_holdout.csv";
inline constexpr const char* forest_predictions = "forest_predictions.csv";
inline constexpr const char* agreement = "agreement.csv";
inline constexpr const char* report = "report.md";
inline constexpr const char* manifest = "MANIFEST";
}  // namespace artifact

inline const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names = {"ols", "rlm", "forest"};
    return names;
}

inline std::string ranking_file(const std::string& model) { return "ranking_" + model + ".csv"; }
inline std::string choropleth_file(const std::string& model) { return "choropleth_" + model + ".geojson"; }
inline std::string choropleth_rejects_file(const std::string& model) { return "choropleth_" + model + "_rejects.csv"; }

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::parse, "cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error(ErrorKind::state, "SHA-256 unavailable");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

/// Output directory plus the warnings collected so far.
class Workspace {
public:
    explicit Workspace(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    std::filesystem::path operator/(const std::string& name) const { return dir_ / name; }
    const std::filesystem::path& dir() const noexcept { return dir_; }
    bool has(const std::string& name) const { return std::filesystem::exists(dir_ / name); }

    void require(const std::string& name) const {
        if (!has(name))
            throw Error(ErrorKind::state, "missing intermediate " + name + " in " + dir_.string() + " (run earlier stages first)");
    }

    void warn(const std::string& stage, const std::string& message) {
        std::ofstream out(dir_ / artifact::warnings, std::ios::app | std::ios::binary);
        out << stage << ": " << message << '\n';
    }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Stages

inline void stage_ingest(const RunConfig& cfg, Workspace& ws) {
    const CensusData census = parse_census(cfg.paths.census.string());
    for (const auto& w : census.warnings) ws.warn("ingest", w);
    tables::write_file(ws / artifact::census_records, [&](DelimitedWriter& w) {
        w.row({"neighborhood_id", "V0001", "V0002", "V0003", "V0004", "V0005", "V0006", "V0007", "AREA_KM2"});
        for (const auto& r : census.records)
            w.row({r.neighborhood_id, format_real(r.v0001), format_real(r.v0002), format_real(r.v0003),
                   format_real(r.v0004), format_real(r.v0005), format_real(r.v0006), format_real(r.v0007),
                   format_real(r.area_km2)});
    });

    const IndicatorTable raw = derive_indicators(census.records, cfg.ingest.zero_denominator);
    for (const auto& w : raw.warnings) ws.warn("ingest", w);
    const IndicatorTable z = standardize(raw);
    tables::write_indicators(ws / artifact::indicators, raw);
    tables::write_indicators(ws / artifact::indicators_std, z);
    tables::write_standardization(ws / artifact::standardization, z);

    const auto records = parse_cases(cfg.paths.cases.string());
    const YearRange period{cfg.ingest.year_from, cfg.ingest.year_to};
    const CaseAggregation agg = aggregate_cases(records, census.records, period, cfg.ingest.day_first);
    tables::write_case_densities(ws / artifact::case_density, agg.densities);
    tables::write_rejects(ws / artifact::case_rejects, agg.rejects);
    if (!agg.rejects.empty()) ws.warn("ingest", std::to_string(agg.rejects.size()) + " case rows rejected");

    tables::write_series(ws / artifact::target, density_over_years(agg.densities, census.records, raw.neighborhood_ids),
                         "density");
    const YearRange vyear{cfg.validation.year, cfg.validation.year};
    tables::write_series(ws / artifact::observed,
                         density_over_years(agg.densities, census.records, raw.neighborhood_ids, vyear), "density");
}

inline IndicatorTable load_standardized(const Workspace& ws) {
    ws.require(artifact::indicators_std);
    ws.require(artifact::standardization);
    IndicatorTable z = tables::read_indicators(ws / artifact::indicators_std);
    tables::attach_standardization(z, ws / artifact::standardization);
    return z;
}

inline void stage_pca(const RunConfig&, Workspace& ws) {
    const IndicatorTable z = load_standardized(ws);
    const PcaModel model = fit_pca(z);
    for (const auto& w : model.warnings) ws.warn("pca", w);
    const ScoreTable scores = transform(model, z);
    tables::write_pca_loadings(ws / artifact::pca_loadings, model);
    tables::write_pca_variance(ws / artifact::pca_variance, model);
    tables::write_scores(ws / artifact::pca_scores, scores);
    tables::write_top_k(ws / artifact::pca_top, scores, 10);
}

inline void stage_select(const RunConfig& cfg, Workspace& ws) {
    ws.require(artifact::pca_loadings);
    ws.require(artifact::pca_variance);
    const PcaModel model = tables::read_pca(ws / artifact::pca_loadings, ws / artifact::pca_variance);
    const auto chosen = select_components(model, cfg.components);
    tables::write_selection(ws / artifact::selection, chosen, model);
}

inline ScoreTable load_selected_scores(const Workspace& ws) {
    ws.require(artifact::pca_scores);
    ws.require(artifact::selection);
    return restrict_components(tables::read_scores(ws / artifact::pca_scores), tables::read_selection(ws / artifact::selection));
}

inline KeyedSeries load_target(const Workspace& ws) {
    ws.require(artifact::target);
    return tables::read_series(ws / artifact::target, "density");
}

inline void stage_ols(const RunConfig&, Workspace& ws) {
    const ScoreTable scores = load_selected_scores(ws);
    const KeyedSeries y = load_target(ws);
    const RegressionFit fit = fit_ols(scores, y);
    for (const auto& w : fit.warnings) ws.warn("ols", w);
    tables::write_regression_summary(ws / artifact::ols_summary, fit);
    tables::write_fit_stats(ws / artifact::ols_fit, fit);
    const Vector observed = align_to(scores.neighborhood_ids, y);
    tables::write_predictions(ws / artifact::ols_predictions, scores.neighborhood_ids, observed, fit.fitted);

    const DiagnosticsReport d = run_diagnostics(fit, scores.scores);
    tables::write_diagnostics(ws / artifact::diagnostics, d);
    tables::write_vif(ws / artifact::vif, d);
}

inline void stage_rlm(const RunConfig& cfg, Workspace& ws) {
    const ScoreTable scores = load_selected_scores(ws);
    const KeyedSeries y = load_target(ws);
    const RegressionFit fit = fit_huber(scores, y, cfg.huber);
    for (const auto& w : fit.warnings) ws.warn("rlm", w);
    tables::write_regression_summary(ws / artifact::rlm_summary, fit);
    tables::write_fit_stats(ws / artifact::rlm_fit, fit);
    const Vector observed = align_to(scores.neighborhood_ids, y);
    tables::write_predictions(ws / artifact::rlm_predictions, scores.neighborhood_ids, observed, fit.fitted);
    tables::write_series(ws / artifact::rlm_weights, {scores.neighborhood_ids, fit.weights}, "weight");
}

struct ForestData {
    std::vector<std::string> ids;
    std::vector<std::string> feature_names;
    DenseMatrix x;
    Vector y;
};

inline ForestData load_forest_data(const RunConfig& cfg, const Workspace& ws) {
    ForestData d;
    if (cfg.forest.feature_set == "indicators") {
        ws.require(artifact::indicators);
        const IndicatorTable t = select_indicators(tables::read_indicators(ws / artifact::indicators), forest_indicator_set());
        d.ids = t.neighborhood_ids;
        d.feature_names = t.names;
        d.x = t.values;
    } else {
        const ScoreTable s = load_selected_scores(ws);
        d.ids = s.neighborhood_ids;
        for (int c : s.components) d.feature_names.push_back(tables::component_label(c));
        d.x = s.scores;
    }
    d.y = align_to(d.ids, load_target(ws));
    return d;
}

inline void stage_grid_search(const RunConfig& cfg, Workspace& ws) {
    const ForestData d = load_forest_data(cfg, ws);
    const GridSearchResult g = grid_search(d.x, d.y, cfg.forest_grid(), cfg.forest.cv_folds, cfg.seed);
    tables::write_grid_search(ws / artifact::forest_grid, g);
    const CvResult& best = g.per_config_cv[g.best_index];
    tables::write_cv_folds(ws / artifact::forest_cv, best);
    for (const auto& f : best.folds)
        if (!f.error.empty()) ws.warn("grid-search", f.error);
}

/// Best configuration recorded by the grid search.
inline ForestConfig load_best_forest_config(const RunConfig& cfg, const Workspace& ws) {
    ws.require(artifact::forest_grid);
    const auto t = read_delimited((ws / artifact::forest_grid).string());
    const std::size_t best_col = t.require_column({"best"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r][best_col] != "1") continue;
        ForestConfig c;
        c.seed = cfg.seed;
        c.n_trees = static_cast<std::size_t>(tables::cell_real(t, r, t.require_column({"n_trees"})));
        const std::string depth = t.rows[r][t.require_column({"max_depth"})];
        if (depth == "none") c.max_depth.reset();
        else c.max_depth = static_cast<std::size_t>(std::stoul(depth));
        const std::string mf = t.rows[r][t.require_column({"max_features"})];
        if (mf == "sqrt") c.max_features = MaxFeatures::sqrt();
        else if (mf == "all") c.max_features = MaxFeatures::all();
        else c.max_features = MaxFeatures::exactly(static_cast<std::size_t>(std::stoul(mf)));
        c.min_samples_leaf = static_cast<std::size_t>(tables::cell_real(t, r, t.require_column({"min_samples_leaf"})));
        c.min_samples_split = static_cast<std::size_t>(tables::cell_real(t, r, t.require_column({"min_samples_split"})));
        return c;
    }
    throw Error(ErrorKind::schema, artifact::forest_grid + std::string(" has no best configuration"));
}

/// Holdout evaluation of the best configuration, then a final fit on every
/// neighborhood whose in-sample predictions feed the ranking.
inline void stage_fit_forest(const RunConfig& cfg, Workspace& ws) {
    const ForestData d = load_forest_data(cfg, ws);
    const ForestConfig best = load_best_forest_config(cfg, ws);

    const TrainTestSplit split = train_test_split(d.ids.size(), cfg.forest.test_fraction, cfg.seed);
    Vector y_train, y_test;
    for (auto r : split.train) y_train.push_back(d.y[r]);
    for (auto r : split.test) y_test.push_back(d.y[r]);
    const ForestModel holdout = fit_forest(d.x.select_rows(split.train), y_train, best, cfg.forest.threads);
    const Vector test_pred = predict_forest(holdout, d.x.select_rows(split.test));
    std::string test_r2 = "nan";
    try {
        test_r2 = format_real(r2_score(y_test, test_pred));
    } catch (const Error& e) {
        ws.warn("forest", std::string("holdout R-squared undefined: ") + e.what());
    }
    tables::write_key_values(ws / artifact::forest_holdout,
                             {{"config", best.label()},
                              {"feature_set", cfg.forest.feature_set},
                              {"n_train", std::to_string(split.train.size())},
                              {"n_test", std::to_string(split.test.size())},
                              {"test_r2", test_r2},
                              {"test_rmse", format_real(rmse(y_test, test_pred))}});

    const ForestModel full = fit_forest(d.x, d.y, best, cfg.forest.threads);
    tables::write_predictions(ws / artifact::forest_predictions, d.ids, d.y, predict_forest(full, d.x));
}

inline std::string predictions_file(const std::string& model) {
    if (model == "ols") return artifact::ols_predictions;
    if (model == "rlm") return artifact::rlm_predictions;
    if (model == "forest") return artifact::forest_predictions;
    throw Error(ErrorKind::config, "unknown model " + model + " (expected ols, rlm or forest)");
}

inline void stage_rank(const RunConfig&, Workspace& ws, const std::vector<std::string>& models = model_names()) {
    for (const auto& m : models) {
        const std::string src = predictions_file(m);
        ws.require(src);
        const RiskRanking r = build_ranking(tables::read_series(ws / src, "predicted"));
        for (const auto& w : r.warnings) ws.warn("rank", m + ": " + w);
        tables::write_ranking(ws / ranking_file(m), r);
    }
}

inline std::vector<tables::AgreementRow> stage_validate(const RunConfig& cfg, Workspace& ws,
                                                        const std::vector<std::string>& models = model_names()) {
    ws.require(artifact::observed);
    const KeyedSeries observed = tables::read_series(ws / artifact::observed, "density");
    std::vector<tables::AgreementRow> rows;
    for (const auto& m : models) {
        ws.require(ranking_file(m));
        const RiskRanking r = tables::read_ranking(ws / ranking_file(m));
        rows.push_back({m, rank_agreement(r, observed, cfg.validation.top_k),
                        concordance_permutation_baseline(r, observed, cfg.validation.permutations, cfg.seed)});
    }
    tables::write_agreement(ws / artifact::agreement, rows);
    return rows;
}

inline void stage_choropleth(const RunConfig& cfg, Workspace& ws, const std::vector<std::string>& models = model_names()) {
    if (cfg.paths.geojson.empty()) {
        ws.warn("choropleth", "no paths.geojson configured; skipped");
        return;
    }
    for (const auto& m : models) {
        ws.require(ranking_file(m));
        const auto r = emit_choropleth_file(tables::read_ranking(ws / ranking_file(m)), cfg.paths.geojson.string(),
                                            (ws / choropleth_file(m)).string(),
                                            (ws / choropleth_rejects_file(m)).string(), cfg.geojson_id_property);
        if (!r.unmatched.empty())
            ws.warn("choropleth", m + ": " + std::to_string(r.unmatched.size()) + " feature(s) without a ranking entry");
    }
}

// ---------------------------------------------------------------------------
// Report, rebuilt from persisted files only

namespace detail {

inline std::string fx(double v, int digits = 4) {
    if (std::isnan(v)) return "n/a";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return format_fixed(v, digits);
}

inline void markdown_table(std::ostream& out, const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
    auto line = [&](const std::vector<std::string>& cells) {
        out << '|';
        for (const auto& c : cells) out << ' ' << c << " |";
        out << '\n';
    };
    line(header);
    out << '|';
    for (std::size_t i = 0; i < header.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& r : rows) line(r);
    out << '\n';
}

inline void csv_as_markdown(std::ostream& out, const std::filesystem::path& path,
                            const std::function<std::string(std::size_t col, const std::string&)>& cell) {
    const auto t = read_delimited(path.string());
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : t.rows) {
        std::vector<std::string> cells;
        for (std::size_t c = 0; c < r.size(); ++c) cells.push_back(cell(c, r[c]));
        rows.push_back(cells);
    }
    markdown_table(out, t.header, rows);
}

inline std::string numeric_cell(const std::string& s, int digits = 4) {
    if (s.find_first_of(".eE") == std::string::npos) return s;  // integers and words pass through
    if (auto v = parse_real_any(s)) return fx(*v, digits);
    return s;
}

}  // namespace detail

/// Column set of the coefficient tables in report.md; `stat` is "t" or "z".
inline std::vector<std::string> report_summary_header(const std::string& stat) {
    return {"Variable", "Coef.", "Std. Error", stat, "p-value", "95% CI"};
}

namespace detail {

}  // namespace detail

inline std::string build_report(const std::filesystem::path& dir) {
    const Workspace ws(dir);
    std::ostringstream out;
    out << "# Neighborhood risk model report\n\n";

    if (ws.has(artifact::indicators)) {
        const IndicatorTable t = tables::read_indicators(ws / artifact::indicators);
        out << "## Indicators\n\n" << t.rows() << " neighborhoods.\n\n";
        std::vector<std::vector<std::string>> rows;
        for (std::size_t c = 0; c < t.cols(); ++c) {
            const Vector col = t.values.col(c);
            const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
            rows.push_back({t.names[c], detail::fx(mean(col)), detail::fx(std::sqrt(sample_variance(col))),
                            detail::fx(*lo), detail::fx(*hi)});
        }
        detail::markdown_table(out, {"Indicator", "Mean", "Std", "Min", "Max"}, rows);
    }
    if (ws.has(artifact::pca_variance)) {
        out << "## Explained variance\n\n";
        detail::csv_as_markdown(out, ws / artifact::pca_variance,
                                [](std::size_t c, const std::string& s) { return c == 0 ? s : detail::numeric_cell(s); });
    }
    if (ws.has(artifact::pca_loadings)) {
        out << "## Component loadings\n\n";
        detail::csv_as_markdown(out, ws / artifact::pca_loadings,
                                [](std::size_t c, const std::string& s) { return c == 0 ? s : detail::numeric_cell(s); });
    }
    if (ws.has(artifact::selection)) {
        const auto chosen = tables::read_selection(ws / artifact::selection);
        const auto t = read_delimited((ws / artifact::selection).string());
        double cum = 0.0;
        for (std::size_t r = 0; r < t.rows.size(); ++r) cum += tables::cell_real(t, r, 1);
        out << "## Selected components\n\n";
        for (std::size_t i = 0; i < chosen.size(); ++i) out << (i ? ", " : "") << chosen[i];
        out << " (explained variance " << detail::fx(100.0 * cum, 2) << "%)\n\n";
    }
    for (const auto& [title, summary, stats] :
         {std::tuple{"OLS regression", artifact::ols_summary, artifact::ols_fit},
          std::tuple{"Robust regression (Huber M-estimator)", artifact::rlm_summary, artifact::rlm_fit}}) {
        if (!ws.has(summary)) continue;
        out << "## " << title << "\n\n";
        const auto sum = tables::read_regression_summary(ws / summary);
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : sum.rows)
            rows.push_back({r.term, detail::fx(r.coef, 2), detail::fx(r.std_error, 2), detail::fx(r.stat, 2),
                            r.p_value < 0.001 ? "<0.001" : detail::fx(r.p_value),
                            "[" + detail::fx(r.ci_lower, 2) + " ; " + detail::fx(r.ci_upper, 2) + "]"});
        detail::markdown_table(out, report_summary_header(sum.header[3]), rows);
        if (ws.has(stats)) {
            const auto kv = tables::read_key_values(ws / stats);
            for (const auto& [k, v] : kv) out << "- " << k << ": " << detail::numeric_cell(v) << '\n';
            out << '\n';
        }
    }
    if (ws.has(artifact::diagnostics)) {
        out << "## Summary of diagnostic tests (OLS residuals)\n\n";
        const auto t = read_delimited((ws / artifact::diagnostics).string());
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : t.rows) rows.push_back({r[0], r[1], r[2]});
        detail::markdown_table(out, {"Test", "Result", "Interpretation"}, rows);
    }
    if (ws.has(artifact::vif)) {
        out << "### Variance inflation factors\n\n";
        detail::csv_as_markdown(out, ws / artifact::vif,
                                [](std::size_t c, const std::string& s) { return c == 0 ? s : detail::numeric_cell(s); });
    }
    if (ws.has(artifact::forest_grid)) {
        const auto t = read_delimited((ws / artifact::forest_grid).string());
        out << "## Random forest\n\n" << t.rows.size() << " configurations searched.\n\n";
        const std::size_t best = t.require_column({"best"});
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : t.rows)
            if (r[best] == "1")
                rows.push_back({r[1], r[2], r[3], r[4], r[5], detail::numeric_cell(r[6]), detail::numeric_cell(r[7]),
                                detail::numeric_cell(r[8])});
        detail::markdown_table(out, {"Trees", "Max depth", "Max features", "Min leaf", "Min split", "CV mean R2", "CV std R2",
                                     "CV mean RMSE"},
                               rows);
    }
    if (ws.has(artifact::forest_cv)) {
        out << "### Cross-validation folds (best configuration)\n\n";
        detail::csv_as_markdown(out, ws / artifact::forest_cv,
                                [](std::size_t c, const std::string& s) { return c == 2 || c == 3 ? detail::numeric_cell(s) : s; });
    }
    if (ws.has(artifact::forest_holdout)) {
        out << "### Holdout evaluation\n\n";
        for (const auto& [k, v] : tables::read_key_values(ws / artifact::forest_holdout))
            out << "- " << k << ": " << detail::numeric_cell(v) << '\n';
        out << '\n';
    }

    // Model comparison from the fit summaries above.
    {
        std::vector<std::vector<std::string>> rows;
        if (ws.has(artifact::ols_fit)) {
            const auto kv = tables::read_key_values(ws / artifact::ols_fit);
            rows.push_back({"OLS", "R2 (in-sample)", detail::numeric_cell(kv.at("r_squared"))});
            rows.push_back({"OLS", "adjusted R2", detail::numeric_cell(kv.at("adj_r_squared"))});
        }
        if (ws.has(artifact::rlm_fit)) {
            const auto kv = tables::read_key_values(ws / artifact::rlm_fit);
            rows.push_back({"Huber", "pseudo-R2", detail::numeric_cell(kv.at("pseudo_r_squared"))});
        }
        if (ws.has(artifact::forest_grid)) {
            const auto t = read_delimited((ws / artifact::forest_grid).string());
            const std::size_t best = t.require_column({"best"});
            for (const auto& r : t.rows)
                if (r[best] == "1") rows.push_back({"Random forest", "CV mean R2", detail::numeric_cell(r[6])});
        }
        if (ws.has(artifact::forest_holdout)) {
            const auto kv = tables::read_key_values(ws / artifact::forest_holdout);
            rows.push_back({"Random forest", "test R2", detail::numeric_cell(kv.at("test_r2"))});
        }
        if (!rows.empty()) {
            out << "## Model comparison\n\n";
            detail::markdown_table(out, {"Model", "Metric", "Value"}, rows);
        }
    }

    for (const auto& m : model_names()) {
        if (!ws.has(ranking_file(m))) continue;
        const RiskRanking r = tables::read_ranking(ws / ranking_file(m));
        out << "## Ranking (" << m << "), top 10\n\n";
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < std::min<std::size_t>(10, r.entries.size()); ++i) {
            const auto& e = r.entries[i];
            rows.push_back({std::to_string(e.rank), e.neighborhood_id, detail::fx(e.raw_prediction, 2),
                            detail::fx(e.normalized_score)});
        }
        detail::markdown_table(out, {"Rank", "Neighborhood", "Predicted density", "Risk score"}, rows);
    }
    if (ws.has(artifact::agreement)) {
        out << "## Agreement with validation-year densities\n\n";
        detail::csv_as_markdown(out, ws / artifact::agreement, [](std::size_t c, const std::string& s) {
            return c == 0 || c == 1 || c == 4 || c == 5 ? s : detail::numeric_cell(s);
        });
    }
    if (ws.has(artifact::warnings)) {
        std::ifstream in(ws / artifact::warnings);
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(in, line)) lines.push_back(line);
        if (!lines.empty()) {
            out << "## Warnings\n\n";
            for (const auto& l : lines) out << "- " << l << '\n';
            out << '\n';
        }
    }
    return out.str();
}

inline void write_report(const std::filesystem::path& dir) {
    std::ofstream out(dir / artifact::report, std::ios::binary);
    if (!out) throw Error(ErrorKind::parse, "cannot write report");
    out << build_report(dir);
}

/// Lists every file in `dir` except the manifest itself, sorted by name.
inline void write_manifest(const std::filesystem::path& dir, const std::string& failed_stage = {},
                           const std::string& cause = {}) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != artifact::manifest) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::ofstream out(dir / artifact::manifest, std::ios::binary);
    out << "status: " << (failed_stage.empty() ? "complete" : "incomplete") << '\n';
    if (!failed_stage.empty()) {
        std::string one_line = cause;
        std::replace(one_line.begin(), one_line.end(), '\n', ' ');
        out << "failed_stage: " << failed_stage << '\n' << "cause: " << one_line << '\n';
    }
    for (const auto& f : files)
        out << sha256_file(f) << "  " << std::filesystem::file_size(f) << "  " << f.filename().string() << '\n';
}

struct PipelineReport {
    std::filesystem::path output_dir;
    std::vector<tables::AgreementRow> agreement;
    std::string markdown;
};

struct PipelineStage {
    std::string name;
    std::function<void(const RunConfig&, Workspace&)> run;
};

inline std::vector<PipelineStage> pipeline_stages(std::vector<tables::AgreementRow>* agreement_out = nullptr) {
    return {
        {"ingest", stage_ingest},
        {"pca", stage_pca},
        {"select", stage_select},
        {"ols", stage_ols},
        {"rlm", stage_rlm},
        {"grid-search", stage_grid_search},
        {"forest", stage_fit_forest},
        {"rank", [](const RunConfig& c, Workspace& w) { stage_rank(c, w); }},
        {"validate",
         [agreement_out](const RunConfig& c, Workspace& w) {
             auto rows = stage_validate(c, w);
             if (agreement_out) *agreement_out = std::move(rows);
         }},
        {"choropleth", [](const RunConfig& c, Workspace& w) { stage_choropleth(c, w); }},
        {"report", [](const RunConfig&, Workspace& w) { write_report(w.dir()); }},
    };
}

/// Runs `fn` as stage `name`; any failure is rewrapped with the stage name and
/// recorded in an incomplete MANIFEST before propagating.
inline void run_stage(const std::string& name, const std::filesystem::path& dir, const std::function<void()>& fn) {
    auto fail = [&](ErrorKind kind, const std::string& cause) {
        try {
            write_manifest(dir, name, cause);
        } catch (...) {
        }
        throw StageError(name, kind, cause);
    };
    try {
        fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        fail(e.kind(), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        fail(ErrorKind::parse, e.what());
    } catch (const std::exception& e) {
        fail(ErrorKind::state, e.what());
    }
}

/// The full protocol. Previous outputs in the directory are removed first so
/// reruns with the same seed are byte-identical.
inline PipelineReport run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    cfg.check_paths();
    std::filesystem::create_directories(cfg.paths.output_dir);
    for (const auto& e : std::filesystem::directory_iterator(cfg.paths.output_dir))
        if (e.is_regular_file()) std::filesystem::remove(e.path());

    Workspace ws(cfg.paths.output_dir);
    {
        std::ofstream out(ws / artifact::run_config, std::ios::binary);
        out << config_to_json(cfg).dump(2) << '\n';
    }
    PipelineReport report;
    report.output_dir = cfg.paths.output_dir;
    for (const auto& stage : pipeline_stages(&report.agreement))
        run_stage(stage.name, ws.dir(), [&] { stage.run(cfg, ws); });
    write_manifest(ws.dir());
    report.markdown = build_report(ws.dir());
    return report;
}

/// Parses a MANIFEST back into (status, file -> sha256).
struct Manifest {
    std::string status;
    std::string failed_stage;
    std::string cause;
    std::map<std::string, std::string> sha256;
    std::map<std::string, std::uintmax_t> bytes;
};

inline Manifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / artifact::manifest);
    if (!in) throw Error(ErrorKind::state, "no MANIFEST in " + dir.string());
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("status: ", 0) == 0) m.status = line.substr(8);
        else if (line.rfind("failed_stage: ", 0) == 0) m.failed_stage = line.substr(14);
        else if (line.rfind("cause: ", 0) == 0) m.cause = line.substr(7);
        else {
            std::istringstream ss(line);
            std::string hash, name;
            std::uintmax_t size = 0;
            if (ss >> hash >> size >> name) {
                m.sha256[name] = hash;
                m.bytes[name] = size;
            }
        }
    }
    return m;
}

}  // namespace spatialrisk
