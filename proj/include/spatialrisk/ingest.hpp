#pragma once

// Census and case ingestion: parse IBGE tract counts, derive the six
// socioeconomic indicators, z-standardize them, and aggregate case records
// into per-km² densities.

#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spatialrisk/delimited.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/keyed.hpp"
#include "spatialrisk/numkernel.hpp"

namespace spatialrisk {

/// Uppercase, accent-stripped, trimmed, single-spaced neighborhood key.
/// Handles the Latin-1 supplement block of UTF-8 (the accents used in
/// Portuguese place names); other multi-byte sequences pass through unchanged.
inline std::string normalize_key(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto c = static_cast<unsigned char>(raw[i]);
        if (c == 0xC3 && i + 1 < raw.size()) {
            const auto d = static_cast<unsigned char>(raw[i + 1]);
            const unsigned cp = 0xC0u + (d & 0x3Fu);  // U+00C0..U+00FF
            char base = 0;
            const unsigned low = cp >= 0xE0 ? cp - 0x20 : cp;
            if (low >= 0xC0 && low <= 0xC5) base = 'A';
            else if (low == 0xC7) base = 'C';
            else if (low >= 0xC8 && low <= 0xCB) base = 'E';
            else if (low >= 0xCC && low <= 0xCF) base = 'I';
            else if (low == 0xD1) base = 'N';
            else if ((low >= 0xD2 && low <= 0xD6) || low == 0xD8) base = 'O';
            else if (low >= 0xD9 && low <= 0xDC) base = 'U';
            else if (low == 0xDD || cp == 0xFF) base = 'Y';
            if (base) {
                out += base;
                ++i;
                continue;
            }
        }
        if (std::isspace(c)) {
            if (!out.empty() && out.back() != ' ') out += ' ';
            continue;
        }
        out += c < 0x80 ? static_cast<char>(std::toupper(c)) : static_cast<char>(c);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

struct CensusTractRaw {
    std::string neighborhood_id;
    double v0001 = 0;  // residents
    double v0002 = 0;  // housing units, private + collective
    double v0003 = 0;  // private housing units
    double v0004 = 0;  // collective housing units
    double v0005 = 0;  // mean residents per occupied private unit (audit only)
    double v0006 = 0;  // imputed occupied private units, percent (audit only)
    double v0007 = 0;  // occupied private housing units
    double area_km2 = 0;
};

struct CensusData {
    std::vector<CensusTractRaw> records;  // first-appearance order
    std::vector<std::string> warnings;
};

inline constexpr std::array<std::string_view, 5> kNeighborhoodColumnAliases = {
    "neighborhood_id", "neighborhood", "bairro", "id", "nm_bairro"};

namespace detail {

inline std::size_t require_id_column(const DelimitedTable& t) {
    for (auto alias : kNeighborhoodColumnAliases)
        if (auto c = t.find_column({alias})) return *c;
    throw Error(ErrorKind::schema, "missing required column neighborhood_id");
}

}  // namespace detail

inline CensusData parse_census_table(const DelimitedTable& t) {
    const std::size_t id_col = detail::require_id_column(t);
    static constexpr std::array<std::string_view, 8> names = {"V0001", "V0002", "V0003", "V0004",
                                                              "V0005", "V0006", "V0007", "AREA_KM2"};
    std::array<std::size_t, 8> cols{};
    for (std::size_t k = 0; k < names.size(); ++k) {
        auto c = t.find_column({names[k]});
        if (!c) throw Error(ErrorKind::schema, "missing required column " + std::string(names[k]));
        cols[k] = *c;
    }
    const bool decimal_comma = t.delimiter == ';';

    CensusData out;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cells = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        std::array<double, 8> v{};
        for (std::size_t k = 0; k < names.size(); ++k) {
            auto parsed = parse_real(cells[cols[k]], decimal_comma);
            if (!parsed) {
                throw Error(ErrorKind::parse, "row " + std::to_string(line) + ": column " + std::string(names[k]) +
                                                  " is not numeric: '" + cells[cols[k]] + "'");
            }
            if (*parsed < 0.0) {
                throw Error(ErrorKind::parse, "row " + std::to_string(line) + ": column " + std::string(names[k]) +
                                                  " is negative");
            }
            v[k] = *parsed;
        }
        CensusTractRaw rec{normalize_key(cells[id_col]), v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
        if (rec.neighborhood_id.empty()) throw Error(ErrorKind::parse, "row " + std::to_string(line) + ": empty id");

        auto [it, inserted] = index.emplace(rec.neighborhood_id, out.records.size());
        if (inserted) {
            out.records.push_back(rec);
            continue;
        }
        // Merge a repeated key: counts and areas add; the two audit columns
        // become occupied-unit weighted means.
        auto& m = out.records[it->second];
        const double w_old = m.v0007, w_new = rec.v0007, w = w_old + w_new;
        if (w > 0) {
            m.v0005 = (m.v0005 * w_old + rec.v0005 * w_new) / w;
            m.v0006 = (m.v0006 * w_old + rec.v0006 * w_new) / w;
        }
        m.v0001 += rec.v0001;
        m.v0002 += rec.v0002;
        m.v0003 += rec.v0003;
        m.v0004 += rec.v0004;
        m.v0007 += rec.v0007;
        m.area_km2 += rec.area_km2;
    }

    for (const auto& rec : out.records) {
        const double tol = 1e-6 * std::max(1.0, rec.v0002);
        if (std::abs(rec.v0003 + rec.v0004 - rec.v0002) > tol) {
            out.warnings.push_back(rec.neighborhood_id + ": V0003 + V0004 (" + format_real(rec.v0003 + rec.v0004) +
                                   ") differs from V0002 (" + format_real(rec.v0002) + ")");
        }
        if (rec.v0007 > rec.v0003) {
            out.warnings.push_back(rec.neighborhood_id + ": V0007 exceeds V0003");
        }
        if (!(rec.area_km2 > 0.0)) out.warnings.push_back(rec.neighborhood_id + ": non-positive area");
    }
    return out;
}

inline CensusData parse_census(const std::string& path) { return parse_census_table(read_delimited(path)); }

// ---------------------------------------------------------------------------
// Indicators

inline const std::vector<std::string>& indicator_names() {
    static const std::vector<std::string> names = {"population_density", "collective_ratio",   "vacancy_rate",
                                                   "avg_household_size", "collective_abs",     "area_km2"};
    return names;
}

/// Rows are neighborhoods, columns named indicators. `col_means`/`col_stds`
/// are populated once standardized.
struct IndicatorTable {
    std::vector<std::string> neighborhood_ids;
    std::vector<std::string> names;
    DenseMatrix values;
    bool standardized = false;
    Vector col_means;
    Vector col_stds;
    std::vector<std::string> warnings;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }
};

enum class ZeroDenominatorPolicy { drop, fail };

inline IndicatorTable derive_indicators(const std::vector<CensusTractRaw>& raw,
                                        ZeroDenominatorPolicy policy = ZeroDenominatorPolicy::drop) {
    std::vector<const CensusTractRaw*> kept;
    std::vector<std::string> bad;
    for (const auto& r : raw) {
        std::string why;
        if (!(r.v0002 > 0)) why += " V0002=0";
        if (!(r.v0003 > 0)) why += " V0003=0";
        if (!(r.v0007 > 0)) why += " V0007=0";
        if (!(r.area_km2 > 0)) why += " area=0";
        if (why.empty() && r.v0007 > r.v0003) why = " V0007>V0003";
        if (why.empty() && r.v0004 > r.v0002) why = " V0004>V0002";
        if (why.empty()) kept.push_back(&r);
        else bad.push_back(r.neighborhood_id + " (" + why.substr(1) + ")");
    }
    IndicatorTable t;
    if (!bad.empty()) {
        std::string list;
        for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
        if (policy == ZeroDenominatorPolicy::fail)
            throw Error(ErrorKind::derivation, "cannot derive indicators for: " + list);
        t.warnings.push_back("dropped " + std::to_string(bad.size()) + " neighborhood(s): " + list);
    }
    t.names = indicator_names();
    t.values = DenseMatrix(kept.size(), t.names.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& r = *kept[i];
        t.neighborhood_ids.push_back(r.neighborhood_id);
        t.values(i, 0) = r.v0001 / r.area_km2;
        t.values(i, 1) = r.v0004 / r.v0002;
        t.values(i, 2) = (r.v0003 - r.v0007) / r.v0003;
        t.values(i, 3) = r.v0001 / r.v0007;
        t.values(i, 4) = r.v0004;
        t.values(i, 5) = r.area_km2;
    }
    return t;
}

/// Column z-scores with the sample (n-1) standard deviation.
inline IndicatorTable standardize(const IndicatorTable& in) {
    if (in.standardized) throw Error(ErrorKind::state, "table is already standardized");
    if (in.rows() < 3) throw Error(ErrorKind::domain, "standardization needs at least 3 rows");
    IndicatorTable out = in;
    out.col_means.assign(in.cols(), 0.0);
    out.col_stds.assign(in.cols(), 0.0);
    for (std::size_t c = 0; c < in.cols(); ++c) {
        const Vector col = in.values.col(c);
        const double m = mean(col);
        const double sd = std::sqrt(sample_variance(col));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
            throw Error(ErrorKind::degenerate, "indicator " + in.names[c] + " has zero variance");
        }
        out.col_means[c] = m;
        out.col_stds[c] = sd;
        for (std::size_t r = 0; r < in.rows(); ++r) out.values(r, c) = (in.values(r, c) - m) / sd;
    }
    out.standardized = true;
    return out;
}

inline IndicatorTable destandardize(const IndicatorTable& in) {
    if (!in.standardized) throw Error(ErrorKind::state, "table is not standardized");
    IndicatorTable out = in;
    for (std::size_t c = 0; c < in.cols(); ++c)
        for (std::size_t r = 0; r < in.rows(); ++r) out.values(r, c) = in.values(r, c) * in.col_stds[c] + in.col_means[c];
    out.standardized = false;
    out.col_means.clear();
    out.col_stds.clear();
    return out;
}

/// Projects out a subset of named indicator columns.
inline IndicatorTable select_indicators(const IndicatorTable& in, const std::vector<std::string>& names) {
    std::vector<std::size_t> cols;
    for (const auto& n : names) {
        auto it = std::find(in.names.begin(), in.names.end(), n);
        if (it == in.names.end()) throw Error(ErrorKind::schema, "unknown indicator " + n);
        cols.push_back(static_cast<std::size_t>(it - in.names.begin()));
    }
    IndicatorTable out;
    out.neighborhood_ids = in.neighborhood_ids;
    out.names = names;
    out.values = in.values.select_cols(cols);
    out.standardized = in.standardized;
    for (auto c : cols) {
        if (!in.col_means.empty()) out.col_means.push_back(in.col_means[c]);
        if (!in.col_stds.empty()) out.col_stds.push_back(in.col_stds[c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cases

struct CaseRecord {
    std::size_t row = 0;  // 1-based source line
    std::string date;
    std::string neighborhood;
};

inline std::vector<CaseRecord> parse_cases_table(const DelimitedTable& t) {
    const std::size_t date_col = t.require_column({"date", "data", "dt_notificacao"});
    const std::size_t nb_col = [&] {
        for (auto alias : kNeighborhoodColumnAliases)
            if (auto c = t.find_column({alias})) return *c;
        throw Error(ErrorKind::schema, "missing required column neighborhood");
    }();
    std::vector<CaseRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        out.push_back({t.line_numbers[r], t.rows[r][date_col], t.rows[r][nb_col]});
    return out;
}

inline std::vector<CaseRecord> parse_cases(const std::string& path) { return parse_cases_table(read_delimited(path)); }

/// ISO-8601 date (YYYY-MM-DD, optionally followed by a time). When
/// `day_first_fallback` is set, DD/MM/YYYY (or DD-MM-YYYY) is tried next.
inline std::optional<std::chrono::year_month_day> parse_case_date(std::string_view text, bool day_first_fallback) {
    const std::string s = trim(text);
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        if (pos + len > s.size()) return std::nullopt;
        int v = 0;
        auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        if (ec != std::errc() || p != s.data() + pos + len) return std::nullopt;
        return v;
    };
    auto make = [](int y, int m, int d) -> std::optional<std::chrono::year_month_day> {
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
        if (!ymd.ok()) return std::nullopt;
        return ymd;
    };
    if (s.size() >= 10 && s[4] == '-' && s[7] == '-' && (s.size() == 10 || s[10] == 'T' || s[10] == ' ')) {
        auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
        if (y && m && d) return make(*y, *m, *d);
        return std::nullopt;
    }
    if (day_first_fallback && s.size() == 10 && (s[2] == '/' || s[2] == '-') && s[5] == s[2]) {
        auto d = num(0, 2), m = num(3, 2), y = num(6, 4);
        if (y && m && d) return make(*y, *m, *d);
    }
    return std::nullopt;
}

struct CaseDensity {
    std::string neighborhood_id;
    int year = 0;
    std::size_t case_count = 0;
    double density = 0.0;  // case_count / area_km2
};

struct RejectEntry {
    std::size_t row = 0;
    std::string reason;
};

struct YearRange {
    int first = 0;
    int last = 0;
    bool contains(int y) const noexcept { return y >= first && y <= last; }
};

struct CaseAggregation {
    std::vector<CaseDensity> densities;  // sorted by (neighborhood, year)
    std::vector<RejectEntry> rejects;
};

/// Groups records by (neighborhood, year). Unknown neighborhoods and years
/// outside the filter become rejects; an unparseable date is a parse error.
inline CaseAggregation aggregate_cases(const std::vector<CaseRecord>& records, const std::vector<CensusTractRaw>& areas,
                                       std::optional<YearRange> year_filter = std::nullopt,
                                       bool day_first_fallback = false) {
    std::unordered_map<std::string, double> area_by_id;
    for (const auto& a : areas) area_by_id[a.neighborhood_id] = a.area_km2;

    std::map<std::pair<std::string, int>, std::size_t> counts;
    CaseAggregation out;
    for (const auto& rec : records) {
        const auto ymd = parse_case_date(rec.date, day_first_fallback);
        if (!ymd) throw Error(ErrorKind::parse, "row " + std::to_string(rec.row) + ": unparseable date '" + rec.date + "'");
        const int year = static_cast<int>(ymd->year());
        const std::string key = normalize_key(rec.neighborhood);
        auto area = area_by_id.find(key);
        if (area == area_by_id.end()) {
            out.rejects.push_back({rec.row, "unknown neighborhood " + key});
            continue;
        }
        if (!(area->second > 0.0)) {
            out.rejects.push_back({rec.row, "neighborhood " + key + " has non-positive area"});
            continue;
        }
        if (year_filter && !year_filter->contains(year)) {
            out.rejects.push_back({rec.row, "year " + std::to_string(year) + " outside " +
                                                std::to_string(year_filter->first) + "-" +
                                                std::to_string(year_filter->last)});
            continue;
        }
        ++counts[{key, year}];
    }
    if (counts.empty()) throw Error(ErrorKind::degenerate, "no case records matched the census table");
    for (const auto& [key, count] : counts) {
        const double area = area_by_id.at(key.first);
        out.densities.push_back({key.first, key.second, count, static_cast<double>(count) / area});
    }
    return out;
}

/// Per-neighborhood case density summed over `years`, for every neighborhood in
/// `ids`; neighborhoods without cases get density 0.
inline KeyedSeries density_over_years(const std::vector<CaseDensity>& densities,
                                      const std::vector<CensusTractRaw>& areas, const std::vector<std::string>& ids,
                                      std::optional<YearRange> years = std::nullopt) {
    std::unordered_map<std::string, double> area_by_id;
    for (const auto& a : areas) area_by_id[a.neighborhood_id] = a.area_km2;
    std::unordered_map<std::string, std::size_t> count;
    for (const auto& d : densities)
        if (!years || years->contains(d.year)) count[d.neighborhood_id] += d.case_count;
    KeyedSeries out;
    for (const auto& id : ids) {
        auto a = area_by_id.find(id);
        if (a == area_by_id.end()) throw Error(ErrorKind::join, "no area for neighborhood " + id);
        out.ids.push_back(id);
        auto c = count.find(id);
        out.values.push_back(c == count.end() ? 0.0 : static_cast<double>(c->second) / a->second);
    }
    return out;
}

}  // namespace spatialrisk
