#pragma once

// Run configuration: one JSON document with nested sections. Any key can be
// overridden on the command line by its dotted path, e.g. --forest.cv_folds=5.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/forest.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/pca.hpp"
#include "spatialrisk/regression.hpp"

namespace spatialrisk {

namespace fs = std::filesystem;
using nlohmann::json;

/// Census-derived predictors used when the forest runs on indicators rather
/// than component scores.
inline const std::vector<std::string>& forest_indicator_set() {
    static const std::vector<std::string> names = {"population_density", "vacancy_rate", "collective_ratio",
                                                   "avg_household_size"};
    return names;
}

struct RunConfig {
    struct Paths {
        fs::path census;
        fs::path cases;
        fs::path geojson;  // optional; no choropleths when empty
        fs::path output_dir = "out";
    } paths;

    struct Ingest {
        int year_from = 2015;
        int year_to = 2024;
        bool day_first = true;
        ZeroDenominatorPolicy zero_denominator = ZeroDenominatorPolicy::drop;
    } ingest;

    ComponentSelection components = std::vector<int>{1, 2, 4, 5, 6};
    HuberConfig huber;

    struct Forest {
        std::string grid = "default";  // "default", "published" or "custom"
        std::vector<ForestConfig> custom_grid;
        std::size_t cv_folds = 10;
        double test_fraction = 0.25;
        std::string feature_set = "components";  // or "indicators"
        unsigned threads = 0;                    // 0: hardware concurrency
    } forest;

    struct Validation {
        int year = 2024;
        std::size_t permutations = 1000;
        std::vector<std::size_t> top_k = {5, 10, 20};
    } validation;

    std::string geojson_id_property = "id";
    std::uint64_t seed = 42;

    std::vector<ForestConfig> forest_grid() const {
        if (forest.grid == "default") return default_forest_grid(seed);
        if (forest.grid == "published") return {published_forest_config(seed)};
        auto g = forest.custom_grid;
        for (auto& c : g) c.seed = seed;
        return g;
    }

    /// Checks every knob that can be checked without reading data.
    void validate() const {
        if (paths.census.empty()) throw Error(ErrorKind::config, "paths.census is required");
        if (paths.cases.empty()) throw Error(ErrorKind::config, "paths.cases is required");
        if (paths.output_dir.empty()) throw Error(ErrorKind::config, "paths.output_dir is required");
        if (ingest.year_from > ingest.year_to) throw Error(ErrorKind::config, "ingest.year_from exceeds ingest.year_to");
        if (const auto* list = std::get_if<std::vector<int>>(&components)) {
            // The derived indicator table always has this many columns.
            select_components(Vector(indicator_names().size(), 1.0 / static_cast<double>(indicator_names().size())),
                              *list);
        } else {
            const double t = std::get<VarianceThreshold>(components).value;
            if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorKind::config, "pca.variance_threshold must lie in (0,1]");
        }
        huber.validate();
        if (forest.cv_folds < 2) throw Error(ErrorKind::config, "forest.cv_folds must be >= 2");
        if (!(forest.test_fraction > 0.0 && forest.test_fraction < 1.0))
            throw Error(ErrorKind::config, "forest.test_fraction must lie in (0,1)");
        if (forest.grid != "default" && forest.grid != "published" && forest.grid != "custom")
            throw Error(ErrorKind::config, "forest.grid must be default, published or a list of configurations");
        if (forest.grid == "custom" && forest.custom_grid.empty())
            throw Error(ErrorKind::config, "forest.grid list is empty");
        for (const auto& c : forest.custom_grid) c.validate();
        if (forest.feature_set != "components" && forest.feature_set != "indicators")
            throw Error(ErrorKind::config, "forest.feature_set must be components or indicators");
        if (validation.year < ingest.year_from || validation.year > ingest.year_to)
            throw Error(ErrorKind::config, "validation.year must lie within the ingest year range");
    }

    /// Fails unless the input files exist.
    void check_paths() const {
        for (const auto* p : {&paths.census, &paths.cases})
            if (!fs::exists(*p)) throw Error(ErrorKind::config, "input file not found: " + p->string());
        if (!paths.geojson.empty() && !fs::exists(paths.geojson))
            throw Error(ErrorKind::config, "input file not found: " + paths.geojson.string());
    }
};

namespace detail {

inline json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;  // bare strings need no quotes
    }
}

template <class T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::config, "config key " + key + " has the wrong type");
    }
}

inline ForestConfig forest_config_from_json(const json& j) {
    static const std::vector<std::string> known = {"n_trees", "max_depth", "max_features", "min_samples_leaf",
                                                   "min_samples_split", "bootstrap"};
    ForestConfig c;
    for (const auto& [k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::config, "unknown forest grid key " + k);
    }
    if (j.contains("n_trees")) c.n_trees = get_as<std::size_t>(j["n_trees"], "n_trees");
    if (j.contains("max_depth")) {
        if (j["max_depth"].is_null()) c.max_depth.reset();
        else c.max_depth = get_as<std::size_t>(j["max_depth"], "max_depth");
    }
    if (j.contains("max_features")) {
        const auto& mf = j["max_features"];
        if (mf.is_number_unsigned()) c.max_features = MaxFeatures::exactly(mf.get<std::size_t>());
        else if (mf == "sqrt") c.max_features = MaxFeatures::sqrt();
        else if (mf == "all") c.max_features = MaxFeatures::all();
        else throw Error(ErrorKind::config, "max_features must be sqrt, all or a positive count");
    }
    if (j.contains("min_samples_leaf")) c.min_samples_leaf = get_as<std::size_t>(j["min_samples_leaf"], "min_samples_leaf");
    if (j.contains("min_samples_split"))
        c.min_samples_split = get_as<std::size_t>(j["min_samples_split"], "min_samples_split");
    if (j.contains("bootstrap")) c.bootstrap = get_as<bool>(j["bootstrap"], "bootstrap");
    return c;
}

}  // namespace detail

/// Applies `--a.b.c=value` style overrides to a config document. Values are
/// read as JSON when they parse, otherwise as strings.
inline void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
    for (std::string item : overrides) {
        if (item.rfind("--", 0) == 0) item = item.substr(2);
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::config, "override must look like key=value: " + item);
        const std::string key = item.substr(0, eq);
        json* node = &doc;
        std::size_t start = 0;
        for (;;) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) throw Error(ErrorKind::config, "malformed override key " + key);
            if (!node->is_object()) *node = json::object();
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        *node = detail::parse_override_value(item.substr(eq + 1));
    }
}

/// Builds a RunConfig from a parsed document. Relative paths resolve against
/// `base_dir`. Unknown sections or keys are configuration errors.
inline RunConfig config_from_json(const json& doc, const fs::path& base_dir = {}) {
    if (!doc.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
    RunConfig c;
    auto section = [&](const char* name, std::initializer_list<const char*> keys) -> const json* {
        auto it = doc.find(name);
        if (it == doc.end()) return nullptr;
        if (!it->is_object()) throw Error(ErrorKind::config, std::string("config section ") + name + " must be an object");
        for (const auto& [k, v] : it->items()) {
            bool ok = false;
            for (const char* key : keys) ok = ok || k == key;
            if (!ok) throw Error(ErrorKind::config, std::string("unknown config key ") + name + "." + k);
        }
        return &*it;
    };
    for (const auto& [k, v] : doc.items()) {
        static const std::vector<std::string> top = {"paths", "ingest", "pca", "huber", "forest",
                                                     "validation", "geojson", "seed"};
        if (std::find(top.begin(), top.end(), k) == top.end()) throw Error(ErrorKind::config, "unknown config key " + k);
    }
    auto resolve = [&](const json& v, const std::string& key) {
        fs::path p = detail::get_as<std::string>(v, key);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        return p.lexically_normal();
    };

    if (const json* s = section("paths", {"census", "cases", "geojson", "output_dir"})) {
        if (s->contains("census")) c.paths.census = resolve((*s)["census"], "paths.census");
        if (s->contains("cases")) c.paths.cases = resolve((*s)["cases"], "paths.cases");
        if (s->contains("geojson")) c.paths.geojson = resolve((*s)["geojson"], "paths.geojson");
        if (s->contains("output_dir")) c.paths.output_dir = resolve((*s)["output_dir"], "paths.output_dir");
    } else if (!base_dir.empty()) {
        c.paths.output_dir = base_dir / c.paths.output_dir;
    }
    if (const json* s = section("ingest", {"year_from", "year_to", "day_first", "zero_denominator"})) {
        if (s->contains("year_from")) c.ingest.year_from = detail::get_as<int>((*s)["year_from"], "ingest.year_from");
        if (s->contains("year_to")) c.ingest.year_to = detail::get_as<int>((*s)["year_to"], "ingest.year_to");
        if (s->contains("day_first")) c.ingest.day_first = detail::get_as<bool>((*s)["day_first"], "ingest.day_first");
        if (s->contains("zero_denominator")) {
            const auto v = detail::get_as<std::string>((*s)["zero_denominator"], "ingest.zero_denominator");
            if (v == "drop") c.ingest.zero_denominator = ZeroDenominatorPolicy::drop;
            else if (v == "fail") c.ingest.zero_denominator = ZeroDenominatorPolicy::fail;
            else throw Error(ErrorKind::config, "ingest.zero_denominator must be drop or fail");
        }
    }
    if (const json* s = section("pca", {"components", "variance_threshold"})) {
        const bool has_list = s->contains("components") && !(*s)["components"].is_null();
        const bool has_threshold = s->contains("variance_threshold") && !(*s)["variance_threshold"].is_null();
        if (has_list && has_threshold)
            throw Error(ErrorKind::config, "set either pca.components or pca.variance_threshold, not both");
        if (has_list) c.components = detail::get_as<std::vector<int>>((*s)["components"], "pca.components");
        if (has_threshold)
            c.components = VarianceThreshold{detail::get_as<double>((*s)["variance_threshold"], "pca.variance_threshold")};
    }
    if (const json* s = section("huber", {"tuning_constant", "max_iterations", "tolerance"})) {
        if (s->contains("tuning_constant"))
            c.huber.tuning_constant = detail::get_as<double>((*s)["tuning_constant"], "huber.tuning_constant");
        if (s->contains("max_iterations"))
            c.huber.max_iterations = detail::get_as<int>((*s)["max_iterations"], "huber.max_iterations");
        if (s->contains("tolerance")) c.huber.tolerance = detail::get_as<double>((*s)["tolerance"], "huber.tolerance");
    }
    if (const json* s = section("forest", {"grid", "cv_folds", "test_fraction", "feature_set", "threads"})) {
        if (s->contains("grid")) {
            const auto& g = (*s)["grid"];
            if (g.is_array()) {
                c.forest.grid = "custom";
                for (const auto& item : g) {
                    if (!item.is_object()) throw Error(ErrorKind::config, "forest.grid entries must be objects");
                    c.forest.custom_grid.push_back(detail::forest_config_from_json(item));
                }
            } else {
                c.forest.grid = detail::get_as<std::string>(g, "forest.grid");
            }
        }
        if (s->contains("cv_folds")) {
            const auto& v = (*s)["cv_folds"];
            if (!v.is_number_integer() || v.get<long long>() < 2)
                throw Error(ErrorKind::config, "forest.cv_folds must be an integer >= 2");
            c.forest.cv_folds = v.get<std::size_t>();
        }
        if (s->contains("test_fraction"))
            c.forest.test_fraction = detail::get_as<double>((*s)["test_fraction"], "forest.test_fraction");
        if (s->contains("feature_set"))
            c.forest.feature_set = detail::get_as<std::string>((*s)["feature_set"], "forest.feature_set");
        if (s->contains("threads")) c.forest.threads = detail::get_as<unsigned>((*s)["threads"], "forest.threads");
    }
    if (const json* s = section("validation", {"year", "permutations", "top_k"})) {
        if (s->contains("year")) c.validation.year = detail::get_as<int>((*s)["year"], "validation.year");
        if (s->contains("permutations"))
            c.validation.permutations = detail::get_as<std::size_t>((*s)["permutations"], "validation.permutations");
        if (s->contains("top_k")) c.validation.top_k = detail::get_as<std::vector<std::size_t>>((*s)["top_k"], "validation.top_k");
    }
    if (const json* s = section("geojson", {"id_property"})) {
        if (s->contains("id_property"))
            c.geojson_id_property = detail::get_as<std::string>((*s)["id_property"], "geojson.id_property");
    }
    if (doc.contains("seed")) c.seed = detail::get_as<std::uint64_t>(doc["seed"], "seed");
    return c;
}

inline json read_config_document(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open config " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
}

/// Reads, overrides and validates a run configuration.
inline RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
    json doc = read_config_document(path);
    apply_overrides(doc, overrides);
    RunConfig c = config_from_json(doc, path.parent_path());
    c.validate();
    return c;
}

/// The resolved configuration as JSON, persisted next to the outputs.
inline json config_to_json(const RunConfig& c) {
    json j;
    j["paths"] = {{"census", c.paths.census.string()},
                  {"cases", c.paths.cases.string()},
                  {"geojson", c.paths.geojson.string()},
                  {"output_dir", c.paths.output_dir.string()}};
    j["ingest"] = {{"year_from", c.ingest.year_from},
                   {"year_to", c.ingest.year_to},
                   {"day_first", c.ingest.day_first},
                   {"zero_denominator", c.ingest.zero_denominator == ZeroDenominatorPolicy::drop ? "drop" : "fail"}};
    if (const auto* list = std::get_if<std::vector<int>>(&c.components)) j["pca"] = {{"components", *list}};
    else j["pca"] = {{"variance_threshold", std::get<VarianceThreshold>(c.components).value}};
    j["huber"] = {{"tuning_constant", c.huber.tuning_constant},
                  {"max_iterations", c.huber.max_iterations},
                  {"tolerance", c.huber.tolerance}};
    json forest = {{"cv_folds", c.forest.cv_folds},
                   {"test_fraction", c.forest.test_fraction},
                   {"feature_set", c.forest.feature_set},
                   {"threads", c.forest.threads}};
    if (c.forest.grid == "custom") {
        json grid = json::array();
        for (const auto& g : c.forest.custom_grid) {
            json item = {{"n_trees", g.n_trees},
                         {"min_samples_leaf", g.min_samples_leaf},
                         {"min_samples_split", g.min_samples_split},
                         {"bootstrap", g.bootstrap}};
            item["max_depth"] = g.max_depth ? json(*g.max_depth) : json(nullptr);
            if (g.max_features.kind == MaxFeatures::Kind::count) item["max_features"] = g.max_features.count;
            else item["max_features"] = g.max_features.label();
            grid.push_back(item);
        }
        forest["grid"] = grid;
    } else {
        forest["grid"] = c.forest.grid;
    }
    j["forest"] = forest;
    j["validation"] = {{"year", c.validation.year},
                       {"permutations", c.validation.permutations},
                       {"top_k", c.validation.top_k}};
    j["geojson"] = {{"id_property", c.geojson_id_property}};
    j["seed"] = c.seed;
    return j;
}

}  // namespace spatialrisk
