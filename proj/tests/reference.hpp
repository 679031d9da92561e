#pragma once

// Frozen values from a reference statistics package; see tools/make_diagnostics_reference.py.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spatialrisk/numkernel.hpp"

namespace reference {

struct BpCase {
    std::vector<double> residuals;
    spatialrisk::DenseMatrix exog;  // intercept column first
    double lm = 0, p = 0, classic_lm = 0, classic_p = 0;
};

struct Case {
    std::string name;
    std::vector<double> sample;
    double shapiro_w = 0, shapiro_p = 0;
    std::optional<BpCase> bp;
};

inline std::vector<Case> load_diagnostics(const std::string& path = std::string(SPATIALRISK_TEST_DATA) +
                                                                    "/diagnostics_reference.json") {
    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in);
    std::vector<Case> out;
    for (const auto& c : doc.at("cases")) {
        Case k;
        k.name = c.at("name").get<std::string>();
        k.sample = c.at("sample").get<std::vector<double>>();
        k.shapiro_w = c.at("shapiro_w").get<double>();
        k.shapiro_p = c.at("shapiro_p").get<double>();
        if (c.contains("bp_residuals")) {
            BpCase b;
            b.residuals = c.at("bp_residuals").get<std::vector<double>>();
            const auto rows = c.at("bp_regressors").get<std::vector<std::vector<double>>>();
            b.exog = spatialrisk::DenseMatrix(rows.size(), rows[0].size() + 1);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                b.exog(i, 0) = 1.0;
                for (std::size_t j = 0; j < rows[i].size(); ++j) b.exog(i, j + 1) = rows[i][j];
            }
            b.lm = c.at("bp_lm").get<double>();
            b.p = c.at("bp_p").get<double>();
            b.classic_lm = c.at("bp_classic_lm").get<double>();
            b.classic_p = c.at("bp_classic_p").get<double>();
            k.bp = std::move(b);
        }
        out.push_back(std::move(k));
    }
    return out;
}

}  // namespace reference
