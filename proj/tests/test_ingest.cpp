#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "oracles.hpp"
#include "spatialrisk/ingest.hpp"

using namespace spatialrisk;

namespace {

DelimitedTable table_from(const std::string& text) {
    std::istringstream in(text);
    return parse_delimited(in);
}

const char* kHeader = "neighborhood_id,V0001,V0002,V0003,V0004,V0005,V0006,V0007,AREA_KM2\n";

CensusTractRaw tract(std::string id, double v1, double v2, double v3, double v4, double v7, double area) {
    CensusTractRaw r;
    r.neighborhood_id = std::move(id);
    r.v0001 = v1;
    r.v0002 = v2;
    r.v0003 = v3;
    r.v0004 = v4;
    r.v0007 = v7;
    r.area_km2 = area;
    return r;
}

std::vector<CensusTractRaw> random_tracts(std::size_t n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<CensusTractRaw> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double v3 = 200 + 3000 * u(gen), v4 = 1 + 40 * u(gen);
        const double v7 = v3 * (0.6 + 0.35 * u(gen));
        out.push_back(tract("N" + std::to_string(i), v7 * (2.2 + 1.5 * u(gen)), v3 + v4, v3, v4, v7, 0.2 + 5 * u(gen)));
    }
    return out;
}

}  // namespace

TEST(ParseCensus, Passthrough) {
    const auto d = parse_census_table(table_from(std::string(kHeader) + "A,1000,400,390,10,2.9,1.5,350,2.0\n"));
    ASSERT_EQ(d.records.size(), 1u);
    const auto& r = d.records[0];
    EXPECT_EQ(r.neighborhood_id, "A");
    EXPECT_EQ(r.v0001, 1000);
    EXPECT_EQ(r.v0002, 400);
    EXPECT_EQ(r.v0003, 390);
    EXPECT_EQ(r.v0004, 10);
    EXPECT_EQ(r.v0005, 2.9);
    EXPECT_EQ(r.v0006, 1.5);
    EXPECT_EQ(r.v0007, 350);
    EXPECT_EQ(r.area_km2, 2.0);
    EXPECT_TRUE(d.warnings.empty());
}

TEST(ParseCensus, DuplicateKeysMerge) {
    const auto d = parse_census_table(table_from(std::string(kHeader) +
                                                 "A,1000,400,390,10,3,1,300,2.0\n"
                                                 "B,10,4,4,0,3,1,3,1.0\n"
                                                 "a ,500,100,95,5,2,3,100,0.5\n"));
    ASSERT_EQ(d.records.size(), 2u);
    const auto& a = d.records[0];
    EXPECT_EQ(a.v0001, 1500);
    EXPECT_EQ(a.v0002, 500);
    EXPECT_EQ(a.v0003, 485);
    EXPECT_EQ(a.v0004, 15);
    EXPECT_EQ(a.v0007, 400);
    EXPECT_DOUBLE_EQ(a.area_km2, 2.5);
    // Audit columns become occupied-unit weighted means.
    EXPECT_DOUBLE_EQ(a.v0005, (3.0 * 300 + 2.0 * 100) / 400);
    EXPECT_DOUBLE_EQ(a.v0006, (1.0 * 300 + 3.0 * 100) / 400);
}

TEST(ParseCensus, MissingColumnIsSchemaError) {
    try {
        parse_census_table(table_from("neighborhood_id,V0001,V0002,V0003,V0004,V0005,V0006,AREA_KM2\nA,1,1,1,0,1,1,1\n"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::schema);
        EXPECT_NE(std::string(e.what()).find("V0007"), std::string::npos);
    }
}

TEST(ParseCensus, NonNumericCellReportsRow) {
    try {
        parse_census_table(table_from(std::string(kHeader) + "A,1,1,1,0,1,1,1,1\nB,1,x,1,0,1,1,1,1\n"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }
}

TEST(ParseCensus, SemicolonDecimalCommaAndAccents) {
    const auto d = parse_census_table(
        table_from("bairro;V0001;V0002;V0003;V0004;V0005;V0006;V0007;AREA_KM2\n"
                   "V\xC3\xA1rzea;1000;400;390;10;2,9;1,5;350;2,25\n"));
    ASSERT_EQ(d.records.size(), 1u);
    EXPECT_EQ(d.records[0].neighborhood_id, "VARZEA");
    EXPECT_DOUBLE_EQ(d.records[0].area_km2, 2.25);
}

TEST(NormalizeKey, UppercaseAccentStripTrim) {
    EXPECT_EQ(normalize_key("  V\xC3\xA1rzea "), "VARZEA");
    EXPECT_EQ(normalize_key("S\xC3\xA3o Jos\xC3\xA9"), "SAO JOSE");
    EXPECT_EQ(normalize_key("Ipsep"), "IPSEP");
}

TEST(DeriveIndicators, Formulas) {
    const auto t = derive_indicators({tract("A", 1000, 200, 100, 5, 80, 2.0)});
    ASSERT_EQ(t.rows(), 1u);
    EXPECT_DOUBLE_EQ(t.values(0, 0), 500.0);   // population density
    EXPECT_DOUBLE_EQ(t.values(0, 1), 0.025);   // collective ratio
    EXPECT_DOUBLE_EQ(t.values(0, 2), 0.2);     // vacancy rate
    EXPECT_DOUBLE_EQ(t.values(0, 3), 12.5);    // household size
    EXPECT_DOUBLE_EQ(t.values(0, 4), 5.0);     // collective units
    EXPECT_DOUBLE_EQ(t.values(0, 5), 2.0);     // area
    EXPECT_EQ(t.names, indicator_names());
}

TEST(DeriveIndicators, ZeroDenominatorPolicy) {
    const std::vector<CensusTractRaw> raw = {tract("A", 1000, 200, 100, 5, 80, 2.0), tract("EMPTY", 0, 0, 0, 0, 0, 1.0)};
    const auto dropped = derive_indicators(raw);
    EXPECT_EQ(dropped.neighborhood_ids, std::vector<std::string>{"A"});
    ASSERT_EQ(dropped.warnings.size(), 1u);
    EXPECT_NE(dropped.warnings[0].find("EMPTY"), std::string::npos);
    try {
        derive_indicators(raw, ZeroDenominatorPolicy::fail);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::derivation);
        EXPECT_NE(std::string(e.what()).find("EMPTY"), std::string::npos);
    }
}

TEST(Standardize, SmallColumn) {
    IndicatorTable t;
    t.neighborhood_ids = {"A", "B", "C"};
    t.names = {"x"};
    t.values = DenseMatrix{{1}, {2}, {3}};
    const auto s = standardize(t);
    EXPECT_DOUBLE_EQ(s.values(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(s.values(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.values(2, 0), 1.0);
    EXPECT_TRUE(s.standardized);
}

TEST(Standardize, ConstantColumnNamed) {
    IndicatorTable t;
    t.neighborhood_ids = {"A", "B", "C"};
    t.names = {"x", "flat"};
    t.values = DenseMatrix{{1, 4}, {2, 4}, {3, 4}};
    try {
        standardize(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate);
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(Standardize, MomentsAndRoundTrip) {
    std::mt19937_64 gen(50);
    const auto raw = derive_indicators(random_tracts(50, gen));
    ASSERT_EQ(raw.rows(), 50u);
    const auto s = standardize(raw);
    const DenseMatrix ref = oracle::zscore(raw.values);
    for (std::size_t c = 0; c < 6; ++c) {
        double m = 0.0, ss = 0.0;
        for (std::size_t r = 0; r < 50; ++r) m += s.values(r, c);
        m /= 50;
        for (std::size_t r = 0; r < 50; ++r) ss += (s.values(r, c) - m) * (s.values(r, c) - m);
        EXPECT_NEAR(m, 0.0, 1e-10);
        EXPECT_NEAR(std::sqrt(ss / 49), 1.0, 1e-10);
        for (std::size_t r = 0; r < 50; ++r) EXPECT_NEAR(s.values(r, c), ref(r, c), 1e-10);
    }
    const auto back = destandardize(s);
    for (std::size_t r = 0; r < 50; ++r)
        for (std::size_t c = 0; c < 6; ++c)
            EXPECT_NEAR(back.values(r, c), raw.values(r, c), 1e-10 * std::max(1.0, std::abs(raw.values(r, c))));
}

TEST(Standardize, RowOrderInvariant) {
    std::mt19937_64 gen(8);
    auto tracts = random_tracts(40, gen);
    const auto a = standardize(derive_indicators(tracts));
    std::shuffle(tracts.begin(), tracts.end(), gen);
    const auto b = standardize(derive_indicators(tracts));
    std::map<std::string, std::size_t> row_of_b;
    for (std::size_t i = 0; i < b.rows(); ++i) row_of_b[b.neighborhood_ids[i]] = i;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t c = 0; c < 6; ++c)
            EXPECT_NEAR(a.values(i, c), b.values(row_of_b.at(a.neighborhood_ids[i]), c), 1e-12);
}

TEST(AggregateCases, DensityIsCountOverArea) {
    std::vector<CaseRecord> recs;
    for (std::size_t i = 0; i < 10; ++i) recs.push_back({i + 2, "2024-03-0" + std::to_string(1 + i % 9), "A"});
    const auto agg = aggregate_cases(recs, {tract("A", 1, 1, 1, 0, 1, 2.0)});
    ASSERT_EQ(agg.densities.size(), 1u);
    EXPECT_EQ(agg.densities[0].year, 2024);
    EXPECT_EQ(agg.densities[0].case_count, 10u);
    EXPECT_DOUBLE_EQ(agg.densities[0].density, 5.0);
}

TEST(AggregateCases, YearFilterAndUnknownGoToRejects) {
    const std::vector<CaseRecord> recs = {{2, "2014-12-31", "A"}, {3, "2015-01-01", "a"}, {4, "2020-05-05", "ZZ"}};
    const auto agg = aggregate_cases(recs, {tract("A", 1, 1, 1, 0, 1, 1.0)}, YearRange{2015, 2024});
    ASSERT_EQ(agg.rejects.size(), 2u);
    EXPECT_EQ(agg.rejects[0].row, 2u);
    EXPECT_NE(agg.rejects[0].reason.find("2014"), std::string::npos);
    EXPECT_EQ(agg.rejects[1].row, 4u);
    ASSERT_EQ(agg.densities.size(), 1u);
    EXPECT_EQ(agg.densities[0].year, 2015);
}

TEST(AggregateCases, BadDateAndEmptyResult) {
    const std::vector<CensusTractRaw> areas = {tract("A", 1, 1, 1, 0, 1, 1.0)};
    try {
        aggregate_cases({{7, "2024-13-01", "A"}}, areas);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos);
    }
    try {
        aggregate_cases({{2, "2024-01-01", "B"}}, areas);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate);
    }
}

TEST(AggregateCases, DayFirstFallback) {
    EXPECT_FALSE(parse_case_date("05/03/2021", false));
    const auto d = parse_case_date("05/03/2021", true);
    ASSERT_TRUE(d);
    EXPECT_EQ(static_cast<unsigned>(d->month()), 3u);
    EXPECT_EQ(static_cast<unsigned>(d->day()), 5u);
    EXPECT_FALSE(parse_case_date("31/02/2021", true));
}

TEST(AggregateCases, MatchesGroupByOracleAndConservesCounts) {
    std::mt19937_64 gen(1000);
    std::vector<CensusTractRaw> areas;
    for (int i = 0; i < 12; ++i) areas.push_back(tract("N" + std::to_string(i), 1, 1, 1, 0, 1, 0.5 + i));
    std::uniform_int_distribution<int> nb(0, 13), yr(2013, 2025), mo(1, 12), dy(1, 28);
    std::vector<CaseRecord> recs;
    std::unordered_map<std::string, std::size_t> oracle_counts;
    for (std::size_t i = 0; i < 1000; ++i) {
        const std::string id = "n" + std::to_string(nb(gen));
        const int y = yr(gen);
        char date[16];
        std::snprintf(date, sizeof date, "%04d-%02d-%02d", y, mo(gen), dy(gen));
        recs.push_back({i + 2, date, id});
        if (id != "n12" && id != "n13" && y >= 2015 && y <= 2024)
            ++oracle_counts[normalize_key(id) + "|" + std::to_string(y)];
    }
    const auto agg = aggregate_cases(recs, areas, YearRange{2015, 2024});
    std::size_t total = 0;
    std::unordered_map<std::string, std::size_t> got;
    for (const auto& d : agg.densities) {
        got[d.neighborhood_id + "|" + std::to_string(d.year)] = d.case_count;
        total += d.case_count;
        const double area = 0.5 + std::stoi(d.neighborhood_id.substr(1));
        EXPECT_EQ(d.density, static_cast<double>(d.case_count) / area);
    }
    EXPECT_EQ(got, oracle_counts);
    EXPECT_EQ(total, recs.size() - agg.rejects.size());
}
