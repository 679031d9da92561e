#pragma once

// Delimited-text artifacts written and read by the pipeline stages. Numbers
// are written in shortest round-trip form so every table reads back exactly.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spatialrisk/delimited.hpp"
#include "spatialrisk/diagnostics.hpp"
#include "spatialrisk/forest.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/pca.hpp"
#include "spatialrisk/ranking.hpp"
#include "spatialrisk/regression.hpp"

namespace spatialrisk::tables {

namespace fs = std::filesystem;

inline void write_file(const fs::path& path, const std::function<void(DelimitedWriter&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::parse, "cannot write " + path.string());
    DelimitedWriter w(out);
    body(w);
    if (!out) throw Error(ErrorKind::parse, "write failed for " + path.string());
}

inline double cell_real(const DelimitedTable& t, std::size_t row, std::size_t col) {
    auto v = parse_real_any(t.rows[row][col]);
    if (!v) {
        throw Error(ErrorKind::parse, "row " + std::to_string(t.line_numbers[row]) + ", column " + t.header[col] +
                                          ": not a number: '" + t.rows[row][col] + "'");
    }
    return *v;
}

inline std::string component_label(int c) { return "Comp. " + std::to_string(c); }

// --- indicators ------------------------------------------------------------

inline void write_indicators(const fs::path& path, const IndicatorTable& t) {
    write_file(path, [&](DelimitedWriter& w) {
        std::vector<std::string> header{"neighborhood_id"};
        header.insert(header.end(), t.names.begin(), t.names.end());
        w.row(header);
        for (std::size_t r = 0; r < t.rows(); ++r) {
            std::vector<std::string> cells{t.neighborhood_ids[r]};
            for (std::size_t c = 0; c < t.cols(); ++c) cells.push_back(format_real(t.values(r, c)));
            w.row(cells);
        }
    });
}

inline IndicatorTable read_indicators(const fs::path& path) {
    const auto t = read_delimited(path.string());
    if (t.header.empty() || to_lower_ascii(t.header[0]) != "neighborhood_id")
        throw Error(ErrorKind::schema, path.string() + ": first column must be neighborhood_id");
    IndicatorTable out;
    out.names.assign(t.header.begin() + 1, t.header.end());
    out.values = DenseMatrix(t.rows.size(), out.names.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.neighborhood_ids.push_back(t.rows[r][0]);
        for (std::size_t c = 0; c < out.names.size(); ++c) out.values(r, c) = cell_real(t, r, c + 1);
    }
    return out;
}

inline void write_standardization(const fs::path& path, const IndicatorTable& t) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"indicator", "mean", "std"});
        for (std::size_t c = 0; c < t.cols(); ++c)
            w.row({t.names[c], format_real(t.col_means[c]), format_real(t.col_stds[c])});
    });
}

/// Marks `table` standardized with the parameters stored at `path`.
inline void attach_standardization(IndicatorTable& table, const fs::path& path) {
    const auto t = read_delimited(path.string());
    table.col_means.assign(table.cols(), 0.0);
    table.col_stds.assign(table.cols(), 0.0);
    if (t.rows.size() != table.cols()) throw Error(ErrorKind::schema, path.string() + ": indicator count mismatch");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r][0] != table.names[r]) throw Error(ErrorKind::schema, path.string() + ": indicator order mismatch");
        table.col_means[r] = cell_real(t, r, 1);
        table.col_stds[r] = cell_real(t, r, 2);
    }
    table.standardized = true;
}

// --- keyed series ----------------------------------------------------------

inline void write_series(const fs::path& path, const KeyedSeries& s, const std::string& value_name) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"neighborhood_id", value_name});
        for (std::size_t i = 0; i < s.size(); ++i) w.row({s.ids[i], format_real(s.values[i])});
    });
}

/// Reads `neighborhood_id` and the named value column (default: the second column).
inline KeyedSeries read_series(const fs::path& path, const std::string& value_name = {}) {
    const auto t = read_delimited(path.string());
    const std::size_t id = t.require_column({"neighborhood_id"});
    std::size_t col = 1;
    if (!value_name.empty()) {
        auto c = t.find_column({value_name});
        if (!c) throw Error(ErrorKind::schema, path.string() + ": missing column " + value_name);
        col = *c;
    }
    KeyedSeries s;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        s.ids.push_back(normalize_key(t.rows[r][id]));
        s.values.push_back(cell_real(t, r, col));
    }
    return s;
}

inline void write_case_densities(const fs::path& path, const std::vector<CaseDensity>& d) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"neighborhood_id", "year", "case_count", "density"});
        for (const auto& x : d)
            w.row({x.neighborhood_id, std::to_string(x.year), std::to_string(x.case_count), format_real(x.density)});
    });
}

inline void write_rejects(const fs::path& path, const std::vector<RejectEntry>& rejects) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"row", "reason"});
        for (const auto& r : rejects) w.row({std::to_string(r.row), r.reason});
    });
}

// --- PCA -------------------------------------------------------------------

/// Indicators x components, the loadings table layout.
inline void write_pca_loadings(const fs::path& path, const PcaModel& m) {
    write_file(path, [&](DelimitedWriter& w) {
        std::vector<std::string> header{"Variable"};
        for (std::size_t k = 0; k < m.n_components(); ++k) header.push_back(component_label(static_cast<int>(k + 1)));
        w.row(header);
        for (std::size_t r = 0; r < m.indicator_names.size(); ++r) {
            std::vector<std::string> cells{m.indicator_names[r]};
            for (std::size_t k = 0; k < m.n_components(); ++k) cells.push_back(format_real(m.loadings(r, k)));
            w.row(cells);
        }
    });
}

inline void write_pca_variance(const fs::path& path, const PcaModel& m) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"component", "eigenvalue", "explained_ratio", "cumulative_ratio"});
        double cum = 0.0;
        for (std::size_t k = 0; k < m.n_components(); ++k) {
            cum += m.explained_ratio[k];
            w.row({std::to_string(k + 1), format_real(m.eigenvalues[k]), format_real(m.explained_ratio[k]),
                   format_real(cum)});
        }
    });
}

inline PcaModel read_pca(const fs::path& loadings_path, const fs::path& variance_path) {
    const auto l = read_delimited(loadings_path.string());
    const auto v = read_delimited(variance_path.string());
    PcaModel m;
    const std::size_t p = l.header.size() - 1;
    m.loadings = DenseMatrix(l.rows.size(), p);
    for (std::size_t r = 0; r < l.rows.size(); ++r) {
        m.indicator_names.push_back(l.rows[r][0]);
        for (std::size_t k = 0; k < p; ++k) m.loadings(r, k) = cell_real(l, r, k + 1);
    }
    for (std::size_t r = 0; r < v.rows.size(); ++r) {
        m.eigenvalues.push_back(cell_real(v, r, 1));
        m.explained_ratio.push_back(cell_real(v, r, 2));
    }
    m.rank = m.eigenvalues.size();
    return m;
}

inline void write_scores(const fs::path& path, const ScoreTable& s) {
    write_file(path, [&](DelimitedWriter& w) {
        std::vector<std::string> header{"neighborhood_id"};
        for (int c : s.components) header.push_back(component_label(c));
        w.row(header);
        for (std::size_t r = 0; r < s.neighborhood_ids.size(); ++r) {
            std::vector<std::string> cells{s.neighborhood_ids[r]};
            for (std::size_t k = 0; k < s.components.size(); ++k) cells.push_back(format_real(s.scores(r, k)));
            w.row(cells);
        }
    });
}

inline ScoreTable read_scores(const fs::path& path) {
    const auto t = read_delimited(path.string());
    ScoreTable s;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        const std::string& h = t.header[c];
        if (h.rfind("Comp. ", 0) != 0) throw Error(ErrorKind::schema, path.string() + ": unexpected column " + h);
        s.components.push_back(std::stoi(h.substr(6)));
    }
    s.scores = DenseMatrix(t.rows.size(), s.components.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        s.neighborhood_ids.push_back(t.rows[r][0]);
        for (std::size_t k = 0; k < s.components.size(); ++k) s.scores(r, k) = cell_real(t, r, k + 1);
    }
    return s;
}

inline void write_top_k(const fs::path& path, const ScoreTable& s, std::size_t k) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"Component", "Top " + std::to_string(k) + " neighborhoods (highest scores)"});
        for (int c : s.components) {
            const auto top = top_k_neighborhoods(s, c, std::min(k, s.neighborhood_ids.size()));
            std::string joined;
            for (const auto& id : top) joined += (joined.empty() ? "" : ", ") + id;
            w.row({"Component " + std::to_string(c), joined});
        }
    });
}

inline void write_selection(const fs::path& path, const std::vector<int>& components, const PcaModel& m) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"component", "explained_ratio"});
        for (int c : components) w.row({std::to_string(c), format_real(m.explained_ratio[static_cast<std::size_t>(c - 1)])});
    });
}

inline std::vector<int> read_selection(const fs::path& path) {
    const auto t = read_delimited(path.string());
    std::vector<int> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back(static_cast<int>(cell_real(t, r, 0)));
    return out;
}

// --- regression ------------------------------------------------------------

inline std::vector<std::string> summary_header(ModelKind kind) {
    return {"Variable", "Coef.", "Std. Error", kind == ModelKind::ols ? "t" : "z", "p-value", "95% CI lower",
            "95% CI upper"};
}

inline void write_regression_summary(const fs::path& path, const RegressionFit& fit) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row(summary_header(fit.kind));
        for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
            w.row({fit.terms[j], format_real(fit.coefficients[j]), format_real(fit.std_errors[j]),
                   format_real(fit.test_stats[j]), format_real(fit.p_values[j]), format_real(fit.ci_lower[j]),
                   format_real(fit.ci_upper[j])});
        }
    });
}

struct SummaryRow {
    std::string term;
    double coef = 0, std_error = 0, stat = 0, p_value = 0, ci_lower = 0, ci_upper = 0;
};

struct RegressionSummary {
    std::vector<std::string> header;
    std::vector<SummaryRow> rows;
};

inline RegressionSummary read_regression_summary(const fs::path& path) {
    const auto t = read_delimited(path.string());
    RegressionSummary s;
    s.header = t.header;
    if (t.header.size() != 7) throw Error(ErrorKind::schema, path.string() + ": expected 7 summary columns");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        s.rows.push_back({t.rows[r][0], cell_real(t, r, 1), cell_real(t, r, 2), cell_real(t, r, 3), cell_real(t, r, 4),
                          cell_real(t, r, 5), cell_real(t, r, 6)});
    }
    return s;
}

inline void write_key_values(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"key", "value"});
        for (const auto& [k, v] : kv) w.row({k, v});
    });
}

inline std::map<std::string, std::string> read_key_values(const fs::path& path) {
    const auto t = read_delimited(path.string());
    std::map<std::string, std::string> out;
    for (const auto& row : t.rows) out[row[0]] = row[1];
    return out;
}

inline void write_fit_stats(const fs::path& path, const RegressionFit& fit) {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"model", std::string(to_string(fit.kind))},
        {"n_obs", std::to_string(fit.n_obs)},
        {"df_resid", std::to_string(fit.df_resid)},
        {"scale", format_real(fit.scale)},
        {"critical_value", format_real(fit.critical_value)},
    };
    if (fit.kind == ModelKind::ols) {
        kv.emplace_back("r_squared", format_real(fit.r_squared));
        kv.emplace_back("adj_r_squared", format_real(fit.adj_r_squared));
    } else {
        kv.emplace_back("pseudo_r_squared", format_real(fit.pseudo_r_squared));
        kv.emplace_back("iterations", std::to_string(fit.iterations));
        kv.emplace_back("converged", fit.converged ? "true" : "false");
    }
    write_key_values(path, kv);
}

inline void write_predictions(const fs::path& path, const std::vector<std::string>& ids, std::span<const double> observed,
                              std::span<const double> fitted) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"neighborhood_id", "observed", "predicted", "residual"});
        for (std::size_t i = 0; i < ids.size(); ++i)
            w.row({ids[i], format_real(observed[i]), format_real(fitted[i]), format_real(observed[i] - fitted[i])});
    });
}

// --- diagnostics -----------------------------------------------------------

inline void write_diagnostics(const fs::path& path, const DiagnosticsReport& d) {
    auto verdict = [](bool ok) { return std::string(ok ? "Satisfied" : "Violated"); };
    double max_vif = 0.0;
    for (double v : d.vif) max_vif = std::max(max_vif, v);
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"Test", "Result", "Interpretation", "statistic", "p_value"});
        w.row({"Shapiro-Wilk (Normality)", "W = " + format_fixed(d.shapiro_w, 4) + ", p = " + format_fixed(d.shapiro_p, 4),
               verdict(d.normality_ok), format_real(d.shapiro_w), format_real(d.shapiro_p)});
        w.row({"Breusch-Pagan (Homoscedasticity)",
               "LM = " + format_fixed(d.bp_lm, 4) + ", p = " + format_fixed(d.bp_p, 4), verdict(d.homoskedasticity_ok),
               format_real(d.bp_lm), format_real(d.bp_p)});
        w.row({"Durbin-Watson (Autocorrelation)", "DW = " + format_fixed(d.dw, 2), verdict(d.autocorrelation_ok),
               format_real(d.dw), ""});
        w.row({"Variance Inflation Factor (VIF)", "max VIF = " + format_fixed(max_vif, 4),
               verdict(d.multicollinearity_ok), format_real(max_vif), ""});
    });
}

inline void write_vif(const fs::path& path, const DiagnosticsReport& d) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"Variable", "VIF"});
        for (std::size_t j = 0; j < d.vif.size(); ++j) w.row({d.vif_terms[j], format_real(d.vif[j])});
    });
}

// --- forest ----------------------------------------------------------------

inline std::vector<std::string> config_cells(const ForestConfig& c) {
    return {std::to_string(c.n_trees), c.max_depth ? std::to_string(*c.max_depth) : std::string("none"),
            c.max_features.label(), std::to_string(c.min_samples_leaf), std::to_string(c.min_samples_split)};
}

inline void write_grid_search(const fs::path& path, const GridSearchResult& g) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"config", "n_trees", "max_depth", "max_features", "min_samples_leaf", "min_samples_split", "mean_r2",
               "std_r2", "mean_rmse", "valid_folds", "best"});
        for (std::size_t i = 0; i < g.grid.size(); ++i) {
            const auto& cv = g.per_config_cv[i];
            std::size_t valid = 0;
            for (const auto& f : cv.folds) valid += f.r2 ? 1 : 0;
            std::vector<std::string> cells{std::to_string(i)};
            auto cc = config_cells(g.grid[i]);
            cells.insert(cells.end(), cc.begin(), cc.end());
            cells.push_back(format_real(cv.mean_r2));
            cells.push_back(format_real(cv.std_r2));
            cells.push_back(format_real(cv.mean_rmse));
            cells.push_back(std::to_string(valid));
            cells.push_back(i == g.best_index ? "1" : "0");
            w.row(cells);
        }
    });
}

inline void write_cv_folds(const fs::path& path, const CvResult& cv) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"fold", "n_test", "r2", "rmse", "error"});
        for (std::size_t f = 0; f < cv.folds.size(); ++f) {
            const auto& fold = cv.folds[f];
            w.row({std::to_string(f + 1), std::to_string(fold.test_rows.size()),
                   fold.r2 ? format_real(*fold.r2) : std::string("nan"), format_real(fold.rmse), fold.error});
        }
    });
}

// --- ranking ---------------------------------------------------------------

inline void write_ranking(const fs::path& path, const RiskRanking& r) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"neighborhood_id", "raw_prediction", "normalized_score", "rank"});
        for (const auto& e : r.entries)
            w.row({e.neighborhood_id, format_real(e.raw_prediction), format_real(e.normalized_score),
                   std::to_string(e.rank)});
    });
}

inline RiskRanking read_ranking(const fs::path& path) {
    const auto t = read_delimited(path.string());
    const std::size_t id = t.require_column({"neighborhood_id"});
    const std::size_t raw = t.require_column({"raw_prediction"});
    const std::size_t score = t.require_column({"normalized_score"});
    const std::size_t rank = t.require_column({"rank"});
    RiskRanking r;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        r.entries.push_back({normalize_key(t.rows[i][id]), cell_real(t, i, raw), cell_real(t, i, score),
                             static_cast<std::size_t>(cell_real(t, i, rank))});
    }
    return r;
}

struct AgreementRow {
    std::string model;
    AgreementReport agreement;
    PermutationBaseline baseline;
};

inline void write_agreement(const fs::path& path, const std::vector<AgreementRow>& rows) {
    write_file(path, [&](DelimitedWriter& w) {
        w.row({"model", "n", "spearman_rho", "concordant_pair_pct", "concordant_pairs", "discordant_pairs", "top5_overlap",
               "top10_overlap", "top20_overlap", "null_mean_pct", "null_q95_pct", "permutation_p"});
        for (const auto& row : rows) {
            const auto& a = row.agreement;
            auto overlap = [&](std::size_t k) {
                for (const auto& [kk, v] : a.top_k_overlap)
                    if (kk == k) return format_real(v);
                return std::string("nan");
            };
            w.row({row.model, std::to_string(a.n), format_real(a.spearman_rho), format_real(a.concordant_pair_pct),
                   std::to_string(a.concordant_pairs), std::to_string(a.discordant_pairs), overlap(5), overlap(10),
                   overlap(20), format_real(row.baseline.mean_pct), format_real(row.baseline.quantile95_pct),
                   format_real(row.baseline.p_value)});
        }
    });
}

}  // namespace spatialrisk::tables
