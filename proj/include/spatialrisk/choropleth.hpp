#pragma once

// Joins a risk ranking onto GeoJSON neighborhood polygons. Geometry is copied
// through untouched; only feature properties are added.

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "spatialrisk/error.hpp"
#include "spatialrisk/ingest.hpp"
#include "spatialrisk/ranking.hpp"

namespace spatialrisk {

struct ChoroplethResult {
    nlohmann::json collection;
    std::size_t matched = 0;
    std::vector<std::string> unmatched;  // feature ids with no ranking entry
};

namespace detail {

inline std::optional<std::string> feature_key(const nlohmann::json& feature, const std::string& id_property) {
    auto as_text = [](const nlohmann::json& v) -> std::optional<std::string> {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) return format_real(v.get<double>());
        return std::nullopt;
    };
    if (auto p = feature.find("properties"); p != feature.end() && p->is_object()) {
        if (auto v = p->find(id_property); v != p->end())
            if (auto s = as_text(*v)) return s;
    }
    if (id_property == "id")
        if (auto v = feature.find("id"); v != feature.end()) return as_text(*v);
    return std::nullopt;
}

}  // namespace detail

/// Adds risk_score, risk_rank and raw_prediction to every feature whose id
/// (normalized like census keys) appears in the ranking. Unmatched features
/// get null values and are listed in `unmatched`.
inline ChoroplethResult emit_choropleth(const RiskRanking& ranking, const nlohmann::json& geojson,
                                        const std::string& id_property = "id") {
    if (!geojson.is_object() || geojson.value("type", "") != "FeatureCollection" || !geojson.contains("features") ||
        !geojson["features"].is_array()) {
        throw Error(ErrorKind::parse, "input is not a GeoJSON FeatureCollection");
    }
    std::unordered_map<std::string, const RankingEntry*> by_id;
    for (const auto& e : ranking.entries) by_id.emplace(e.neighborhood_id, &e);

    ChoroplethResult out;
    out.collection = geojson;
    std::size_t index = 0;
    for (auto& feature : out.collection["features"]) {
        if (!feature.is_object() || feature.value("type", "") != "Feature")
            throw Error(ErrorKind::parse, "feature " + std::to_string(index) + " is not a GeoJSON Feature");
        if (!feature.contains("properties") || feature["properties"].is_null())
            feature["properties"] = nlohmann::json::object();
        auto& props = feature["properties"];
        const auto key = detail::feature_key(feature, id_property);
        const RankingEntry* hit = nullptr;
        if (key) {
            if (auto it = by_id.find(normalize_key(*key)); it != by_id.end()) hit = it->second;
        }
        if (hit) {
            props["risk_score"] = hit->normalized_score;
            props["risk_rank"] = hit->rank;
            props["raw_prediction"] = hit->raw_prediction;
            ++out.matched;
        } else {
            props["risk_score"] = nullptr;
            props["risk_rank"] = nullptr;
            props["raw_prediction"] = nullptr;
            out.unmatched.push_back(key.value_or("<feature " + std::to_string(index) + " without id>"));
        }
        ++index;
    }
    if (out.matched == 0)
        throw Error(ErrorKind::join, "no GeoJSON feature matched a ranked neighborhood (id property '" + id_property + "')");
    return out;
}

inline nlohmann::json read_geojson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, path + ": " + e.what());
    }
}

/// Writes the augmented collection and a rejects sidecar (feature_id, reason).
inline ChoroplethResult emit_choropleth_file(const RiskRanking& ranking, const std::string& geojson_in,
                                             const std::string& geojson_out, const std::string& rejects_out,
                                             const std::string& id_property = "id") {
    ChoroplethResult r = emit_choropleth(ranking, read_geojson(geojson_in), id_property);
    std::ofstream out(geojson_out);
    if (!out) throw Error(ErrorKind::parse, "cannot write " + geojson_out);
    out << r.collection.dump() << '\n';
    std::ofstream rej(rejects_out);
    if (!rej) throw Error(ErrorKind::parse, "cannot write " + rejects_out);
    DelimitedWriter w(rej);
    w.row({"feature_id", "reason"});
    for (const auto& id : r.unmatched) w.row({id, "no ranking entry"});
    return r;
}

}  // namespace spatialrisk
