#pragma once

// Synthetic city generator. Latent neighborhood factors drive the census
// counts; case densities follow a known linear model on the component scores
// of the derived indicators, with Gaussian noise and a few gross outliers.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spatialrisk/delimited.hpp"
#include "spatialrisk/forest.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/pca.hpp"

namespace spatialrisk {

struct SynthOptions {
    std::size_t n_neighborhoods = 60;
    std::uint64_t seed = 7;
    int year_from = 2015;
    int year_to = 2024;
    double intercept = 710.48;
    // Planted coefficients on components 1, 2, 4, 5, 6 (component 3 has none).
    std::array<double, 6> coefficients = {-197.65, -158.58, 0.0, -146.91, 162.75, 318.90};
    double coefficient_scale = 0.5;
    double noise_sd = 40.0;
    double contamination = 0.05;     // fraction of neighborhoods with a gross outlier
    double outlier_shift_sd = 6.0;   // outlier size in noise_sd units
    double density_floor = 30.0;
    double year_noise = 0.08;        // relative noise on each year's case count
    std::size_t unknown_case_rows = 25;
    std::size_t out_of_range_rows = 15;
};

struct SynthCase {
    std::string date;
    std::string neighborhood;
};

struct SynthCity {
    std::vector<std::string> names;            // display names, accents included
    std::vector<CensusTractRaw> census;        // one record per neighborhood (ids normalized)
    std::vector<CensusTractRaw> census_rows;   // as written, including one split tract
    KeyedSeries truth_density;                 // planted cases per km² over the full period
    std::vector<SynthCase> cases;
    nlohmann::json geojson;
};

inline const std::vector<std::string>& recife_neighborhood_names() {
    static const std::vector<std::string> names = {
        "Boa Viagem",     "Casa Amarela",      "Iputinga",       "Várzea",          "Cordeiro",
        "Ibura",          "Imbiribeira",       "Boa Vista",      "Santo Amaro",     "Afogados",
        "Água Fria",      "Alto José do Pinho", "Areias",        "Arruda",          "Barro",
        "Beberibe",       "Bongi",             "Brasília Teimosa", "Cajueiro",      "Campo Grande",
        "Casa Forte",     "Caxangá",           "Cohab",          "Curado",          "Derby",
        "Dois Irmãos",    "Encruzilhada",      "Espinheiro",     "Estância",        "Fundão",
        "Graças",         "Hipódromo",         "Jaqueira",       "Jardim São Paulo", "Jiquiá",
        "Linha do Tiro",  "Macaxeira",         "Madalena",       "Mangueira",       "Monteiro",
        "Mustardinha",    "Nova Descoberta",   "Parnamirim",     "Peixinhos",       "Pina",
        "Poço",           "Prado",             "Recife",         "Rosarinho",       "San Martin",
        "Sancho",         "Santana",           "Santo Antônio",  "São José",        "Sítio dos Pintos",
        "Soledade",       "Tamarineira",       "Torre",          "Torreão",         "Totó",
        "Vasco da Gama",  "Zumbi"};
    return names;
}

namespace detail {

inline double standard_normal(CounterRng& rng) {
    constexpr double two_pi = 6.283185307179586;
    double u1;
    do {
        u1 = rng.uniform();
    } while (u1 <= 0.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * rng.uniform());
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Alternates letter case so the cases file exercises key normalization.
inline std::string scramble_case(const std::string& s, std::uint64_t salt) {
    std::string out = s;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto c = static_cast<unsigned char>(out[i]);
        if (c < 0x80 && std::isalpha(c))
            out[i] = static_cast<char>(((i + salt) % 3 == 0) ? std::toupper(c) : std::tolower(c));
    }
    return out;
}

inline std::string two_digits(unsigned v) { return (v < 10 ? "0" : "") + std::to_string(v); }

}  // namespace detail

inline SynthCity generate_city(const SynthOptions& opt = {}) {
    if (opt.n_neighborhoods < 10) throw Error(ErrorKind::config, "synthetic city needs at least 10 neighborhoods");
    if (opt.year_from > opt.year_to) throw Error(ErrorKind::config, "synthetic year range is empty");
    CounterRng rng(opt.seed, 0xC17ULL);
    const auto& base = recife_neighborhood_names();

    SynthCity city;
    for (std::size_t i = 0; i < opt.n_neighborhoods; ++i) {
        std::string name = base[i % base.size()];
        if (i >= base.size()) name += " " + std::to_string(i / base.size() + 1);
        city.names.push_back(name);
    }

    // Latent factors: urbanization, deprivation, crowding, institutional presence.
    for (std::size_t i = 0; i < opt.n_neighborhoods; ++i) {
        const double urban = detail::standard_normal(rng);
        const double depriv = detail::standard_normal(rng);
        const double crowd = 0.5 * depriv + 0.85 * detail::standard_normal(rng);
        const double inst = 0.4 * urban + 0.9 * detail::standard_normal(rng);

        CensusTractRaw r;
        r.neighborhood_id = normalize_key(city.names[i]);
        r.area_km2 = std::round(std::exp(0.25 - 0.45 * urban + 0.35 * detail::standard_normal(rng)) * 1000.0) / 1000.0;
        r.area_km2 = std::max(r.area_km2, 0.2);
        const double units_per_km2 = std::exp(8.0 + 0.6 * urban + 0.2 * detail::standard_normal(rng));
        r.v0003 = std::round(units_per_km2 * r.area_km2);
        const double vacancy = 0.04 + 0.18 * detail::logistic(0.9 * depriv - 0.5 * urban + 0.4 * detail::standard_normal(rng));
        r.v0007 = std::round(r.v0003 * (1.0 - vacancy));
        const double collective = 0.0005 + 0.01 * detail::logistic(1.2 * inst + 0.5 * detail::standard_normal(rng));
        r.v0004 = std::round(r.v0003 * collective / (1.0 - collective));
        r.v0002 = r.v0003 + r.v0004;
        const double hh = std::clamp(2.9 + 0.35 * crowd + 0.1 * detail::standard_normal(rng), 1.8, 4.5);
        r.v0001 = std::round(r.v0007 * hh);
        r.v0005 = std::round(100.0 * r.v0001 / r.v0007) / 100.0;
        r.v0006 = std::round(1000.0 * (1.0 + 2.0 * rng.uniform())) / 1000.0;
        city.census.push_back(r);
    }

    // Planted signal on the component scores the pipeline itself will compute.
    const IndicatorTable z = standardize(derive_indicators(city.census, ZeroDenominatorPolicy::fail));
    const PcaModel pca = fit_pca(z);
    const ScoreTable scores = transform(pca, z);
    const std::size_t n_outliers =
        static_cast<std::size_t>(std::llround(opt.contamination * static_cast<double>(opt.n_neighborhoods)));
    std::vector<std::size_t> order(opt.n_neighborhoods);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<char> outlier(opt.n_neighborhoods, 0);
    for (std::size_t k = 0; k < n_outliers; ++k) outlier[order[k]] = 1;

    for (std::size_t i = 0; i < opt.n_neighborhoods; ++i) {
        double d = opt.intercept;
        for (std::size_t k = 0; k < opt.coefficients.size(); ++k)
            d += opt.coefficient_scale * opt.coefficients[k] * scores.scores(i, k);
        d += opt.noise_sd * detail::standard_normal(rng);
        if (outlier[i]) d += opt.outlier_shift_sd * opt.noise_sd * (1.0 + rng.uniform());
        city.truth_density.ids.push_back(city.census[i].neighborhood_id);
        city.truth_density.values.push_back(std::max(d, opt.density_floor));
    }

    // Cases: the planted total density spread over the years with a fixed
    // seasonal profile and per-year noise.
    const int n_years = opt.year_to - opt.year_from + 1;
    std::vector<double> year_weight(static_cast<std::size_t>(n_years));
    for (int y = 0; y < n_years; ++y) year_weight[static_cast<std::size_t>(y)] = 1.0 + 0.6 * std::sin(1.7 * y + 0.3);
    const double wsum = std::accumulate(year_weight.begin(), year_weight.end(), 0.0);
    for (auto& w : year_weight) w /= wsum;

    auto random_date = [&](int year, bool day_first) {
        const unsigned month = static_cast<unsigned>(1 + rng.below(12));
        const unsigned day = static_cast<unsigned>(1 + rng.below(28));
        if (day_first) return detail::two_digits(day) + "/" + detail::two_digits(month) + "/" + std::to_string(year);
        return std::to_string(year) + "-" + detail::two_digits(month) + "-" + detail::two_digits(day);
    };
    for (std::size_t i = 0; i < opt.n_neighborhoods; ++i) {
        const double expected_total = city.truth_density.values[i] * city.census[i].area_km2;
        for (int y = 0; y < n_years; ++y) {
            const double factor = std::max(0.0, 1.0 + opt.year_noise * detail::standard_normal(rng));
            const auto count = static_cast<std::size_t>(
                std::llround(expected_total * year_weight[static_cast<std::size_t>(y)] * factor));
            for (std::size_t c = 0; c < count; ++c) {
                const bool alt_name = rng.below(4) == 0;
                const std::string label = alt_name ? detail::scramble_case(city.names[i], rng.below(3)) : city.names[i];
                city.cases.push_back({random_date(opt.year_from + y, rng.below(10) == 0), label});
            }
        }
    }
    for (std::size_t k = 0; k < opt.unknown_case_rows; ++k)
        city.cases.push_back({random_date(opt.year_from + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_years))), false),
                              "Bairro Inexistente"});
    for (std::size_t k = 0; k < opt.out_of_range_rows; ++k)
        city.cases.push_back({random_date(opt.year_from - 1, false), city.names[rng.below(opt.n_neighborhoods)]});
    rng.shuffle(city.cases);

    // Census as written: the first neighborhood is split into two tracts.
    city.census_rows = city.census;
    {
        CensusTractRaw& a = city.census_rows[0];
        CensusTractRaw b = a;
        auto part = [](double v) { return std::floor(v * 0.4); };
        b.v0001 = part(a.v0001);
        b.v0003 = part(a.v0003);
        b.v0004 = part(a.v0004);
        b.v0007 = std::min(part(a.v0007), b.v0003);
        b.v0002 = b.v0003 + b.v0004;
        b.area_km2 = std::round(a.area_km2 * 400.0) / 1000.0;
        a.v0001 -= b.v0001;
        a.v0003 -= b.v0003;
        a.v0004 -= b.v0004;
        a.v0007 -= b.v0007;
        a.v0002 = a.v0003 + a.v0004;
        a.area_km2 = std::round((a.area_km2 - b.area_km2) * 1000.0) / 1000.0;
        city.census_rows.push_back(b);
    }

    // Square polygons on a grid near Recife, side proportional to sqrt(area).
    nlohmann::json features = nlohmann::json::array();
    const std::size_t per_row = 8;
    for (std::size_t i = 0; i < opt.n_neighborhoods; ++i) {
        const double cx = -34.95 + 0.02 * static_cast<double>(i % per_row);
        const double cy = -8.00 - 0.02 * static_cast<double>(i / per_row);
        const double h = 0.5 * std::sqrt(city.census[i].area_km2) / 111.0;
        nlohmann::json ring = nlohmann::json::array(
            {{cx - h, cy - h}, {cx + h, cy - h}, {cx + h, cy + h}, {cx - h, cy + h}, {cx - h, cy - h}});
        features.push_back({{"type", "Feature"},
                            {"properties", {{"id", city.names[i]}, {"name", city.names[i]}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}}});
    }
    features.push_back({{"type", "Feature"},
                        {"properties", {{"id", "Parque Sem Censo"}, {"name", "Parque Sem Censo"}}},
                        {"geometry",
                         {{"type", "Polygon"},
                          {"coordinates", nlohmann::json::array({nlohmann::json::array(
                                              {{-34.99, -7.96}, {-34.98, -7.96}, {-34.98, -7.95}, {-34.99, -7.96}})})}}}});
    city.geojson = {{"type", "FeatureCollection"}, {"features", features}};
    return city;
}

struct SynthFiles {
    std::filesystem::path census, cases, geojson, truth, config;
};

/// Writes census.csv (semicolon, decimal comma), cases.csv, neighborhoods.geojson,
/// truth_density.csv and a ready-to-run config.json into `dir`.
inline SynthFiles write_city(const SynthCity& city, const std::filesystem::path& dir, const SynthOptions& opt = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    SynthFiles f{dir / "census.csv", dir / "cases.csv", dir / "neighborhoods.geojson", dir / "truth_density.csv",
                 dir / "config.json"};
    auto open = [](const fs::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(ErrorKind::parse, "cannot write " + p.string());
        return out;
    };
    auto comma = [](double v) {
        std::string s = format_real(v);
        for (auto& ch : s)
            if (ch == '.') ch = ',';
        return s;
    };
    {
        auto out = open(f.census);
        DelimitedWriter w(out, ';');
        w.row({"bairro", "V0001", "V0002", "V0003", "V0004", "V0005", "V0006", "V0007", "AREA_KM2"});
        for (std::size_t i = 0; i < city.census_rows.size(); ++i) {
            const auto& r = city.census_rows[i];
            const std::string& name = city.names[i < city.names.size() ? i : 0];
            w.row({name, comma(r.v0001), comma(r.v0002), comma(r.v0003), comma(r.v0004), comma(r.v0005),
                   comma(r.v0006), comma(r.v0007), comma(r.area_km2)});
        }
    }
    {
        auto out = open(f.cases);
        DelimitedWriter w(out);
        w.row({"dt_notificacao", "bairro"});
        for (const auto& c : city.cases) w.row({c.date, c.neighborhood});
    }
    {
        auto out = open(f.geojson);
        out << city.geojson.dump(1) << '\n';
    }
    {
        auto out = open(f.truth);
        DelimitedWriter w(out);
        w.row({"neighborhood_id", "truth_density"});
        for (std::size_t i = 0; i < city.truth_density.size(); ++i)
            w.row({city.truth_density.ids[i], format_real(city.truth_density.values[i])});
    }
    {
        nlohmann::json cfg = {
            {"paths",
             {{"census", "census.csv"}, {"cases", "cases.csv"}, {"geojson", "neighborhoods.geojson"}, {"output_dir", "out"}}},
            {"ingest", {{"year_from", opt.year_from}, {"year_to", opt.year_to}, {"day_first", true}}},
            {"pca", {{"components", {1, 2, 4, 5, 6}}}},
            {"forest", {{"grid", "default"}, {"cv_folds", 10}, {"test_fraction", 0.25}}},
            {"validation", {{"year", opt.year_to}, {"permutations", 1000}}},
            {"seed", opt.seed}};
        auto out = open(f.config);
        out << cfg.dump(2) << '\n';
    }
    return f;
}

}  // namespace spatialrisk
