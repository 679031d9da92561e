#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "spatialrisk/error.hpp"

namespace spatialrisk {

/// One real value per neighborhood, in a fixed id order.
struct KeyedSeries {
    std::vector<std::string> ids;
    std::vector<double> values;

    std::size_t size() const noexcept { return ids.size(); }
};

inline std::string describe_symmetric_difference(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::vector<std::string> only_a, only_b;
    std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(only_a));
    std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(only_b));
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? ", " : "") + v[i];
        if (v.size() > 20) s += ", ... (" + std::to_string(v.size()) + " total)";
        return s.empty() ? std::string("none") : s;
    };
    return "only in left: [" + join(only_a) + "]; only in right: [" + join(only_b) + "]";
}

/// Reorders `series` to follow `ids`. Throws join error if the key sets differ.
inline std::vector<double> align_to(const std::vector<std::string>& ids, const KeyedSeries& series) {
    std::unordered_map<std::string, double> by_id;
    for (std::size_t i = 0; i < series.ids.size(); ++i) {
        if (!by_id.emplace(series.ids[i], series.values[i]).second)
            throw Error(ErrorKind::join, "duplicate key " + series.ids[i]);
    }
    if (by_id.size() != ids.size()) throw Error(ErrorKind::join, describe_symmetric_difference(ids, series.ids));
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorKind::join, describe_symmetric_difference(ids, series.ids));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace spatialrisk
