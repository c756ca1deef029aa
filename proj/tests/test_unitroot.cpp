#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "gratis/features.hpp"
#include "gratis/unitroot.hpp"

using namespace gratis;
using nlohmann::json;

namespace {

const json& reference() {
    static const json j = [] {
        std::ifstream in(std::string(GRATIS_TEST_DATA_DIR) + "/reference_values.json");
        return json::parse(in);
    }();
    return j;
}

std::vector<double> white(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> x(n);
    for (auto& v : x) v = nd(rng);
    return x;
}

std::vector<double> cumsum(std::vector<double> x) {
    for (std::size_t i = 1; i < x.size(); ++i) x[i] += x[i - 1];
    return x;
}

}  // namespace

TEST(UnitRootOracle, KpssTrendLag1) {
    for (const auto& s : reference()["series"]) {
        auto x = s["values"].get<std::vector<double>>();
        EXPECT_NEAR(kpss_stat(x, true, 1), s["kpss_trend_lag1"].get<double>(), 1e-4) << s["name"];
    }
}

TEST(UnitRootOracle, KpssLevel) {
    for (const auto& s : reference()["series"]) {
        auto x = s["values"].get<std::vector<double>>();
        const int lag = static_cast<int>(3.0 * std::sqrt(static_cast<double>(x.size())) / 13.0);
        ASSERT_EQ(lag, s["kpss_level_lag"].get<int>());
        EXPECT_NEAR(kpss_stat(x, false, lag), s["kpss_level"].get<double>(), 1e-4) << s["name"];
    }
}

TEST(UnitRootOracle, PhillipsPerronZalpha) {
    for (const auto& s : reference()["series"]) {
        auto x = s["values"].get<std::vector<double>>();
        EXPECT_NEAR(pp_zalpha(x, 1), s["pp_zalpha_lag1"].get<double>(), 1e-4) << s["name"];
    }
}

TEST(UnitRootOracle, Ocsb) {
    int checked = 0;
    for (const auto& s : reference()["series"]) {
        if (!s.contains("ocsb_stat")) continue;
        auto x = s["values"].get<std::vector<double>>();
        auto r = ocsb_stat(x, s["period"].get<int>());
        EXPECT_NEAR(r.stat, s["ocsb_stat"].get<double>(), 1e-4) << s["name"];
        EXPECT_EQ(r.lag, s["ocsb_lag"].get<int>()) << s["name"];
        ++checked;
    }
    EXPECT_GE(checked, 25);
}

TEST(UnitRootOracle, AcfPacfFeatures) {
    for (const auto& s : reference()["series"]) {
        auto x = s["values"].get<std::vector<double>>();
        const int m = s["period"].get<int>();
        const auto& r = s["acf_pacf"];
        auto a = acf_feature_set(x, m);
        auto p = pacf_feature_set(x, m);
        EXPECT_NEAR(a.x_acf1, r["x.acf1"].get<double>(), 1e-8);
        EXPECT_NEAR(a.x_acf10, r["x.acf10"].get<double>(), 1e-8);
        EXPECT_NEAR(a.diff1_acf1, r["diff1.acf1"].get<double>(), 1e-8);
        EXPECT_NEAR(a.diff1_acf10, r["diff1.acf10"].get<double>(), 1e-8);
        EXPECT_NEAR(a.diff2_acf1, r["diff2.acf1"].get<double>(), 1e-8);
        EXPECT_NEAR(a.diff2_acf10, r["diff2.acf10"].get<double>(), 1e-8);
        EXPECT_NEAR(a.seas_acf1, r["seas.acf1"].get<double>(), 1e-8);
        EXPECT_NEAR(p.x_pacf5, r["x.pacf5"].get<double>(), 1e-8);
        EXPECT_NEAR(p.diff1_pacf5, r["diff1.pacf5"].get<double>(), 1e-8);
        EXPECT_NEAR(p.diff2_pacf5, r["diff2.pacf5"].get<double>(), 1e-8);
        EXPECT_NEAR(p.seas_pacf, r["seas.pacf"].get<double>(), 1e-8) << s["name"];
    }
}

TEST(Kpss, TrendStationaryBelowCriticalValue) {
    auto e = white(2000, 1);
    for (std::size_t t = 0; t < e.size(); ++t) e[t] += 0.01 * t;
    EXPECT_LT(kpss_stat(e, true, 1), kKpssTrendCrit5);
}

TEST(Kpss, RandomWalkRejects) {
    int above = 0;
    for (std::uint64_t s = 0; s < 100; ++s)
        if (kpss_stat(cumsum(white(2000, 100 + s)), true, 1) > kKpssTrendCrit5) ++above;
    EXPECT_GE(above, 95);
}

TEST(PhillipsPerron, WhiteNoiseStronglyNegative) {
    EXPECT_LT(pp_zalpha(white(2000, 3), 1), -100.0);
}

TEST(Ndiffs, WhiteNoiseRandomWalkAndDoubleIntegrated) {
    EXPECT_EQ(ndiffs(white(500, 4)), 0);
    // The differenced walk is white noise, which a 5% test keeps about 95% of the time.
    int ones = 0;
    for (std::uint64_t s = 0; s < 100; ++s)
        if (ndiffs(cumsum(white(2000, 200 + s))) == 1) ++ones;
    EXPECT_GE(ones, 95);
    EXPECT_EQ(ndiffs(cumsum(cumsum(white(500, 5)))), 2);
}

TEST(Ndiffs, DifferencingNeverIncreases) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto x = white(300, 400 + s);
        if (s % 3 >= 1) x = cumsum(x);
        if (s % 3 == 2) x = cumsum(x);
        const int d = ndiffs(x);
        if (d > 0) EXPECT_LE(ndiffs(stats::diff(x, 1, d)), d);
    }
}

TEST(Nsdiffs, NonSeasonalAndShortReturnZero) {
    auto x = white(200, 6);
    EXPECT_EQ(nsdiffs(x, 1), 0);
    EXPECT_EQ(nsdiffs(std::vector<double>(x.begin(), x.begin() + 20), 12), 0);
}

TEST(Nsdiffs, SeasonalRandomWalkNeedsDifference) {
    auto e = white(240, 7);
    std::vector<double> x(e.size());
    for (std::size_t t = 0; t < e.size(); ++t) x[t] = (t >= 12 ? x[t - 12] : 0.0) + e[t];
    EXPECT_EQ(nsdiffs(x, 12), 1);
}

TEST(Nsdiffs, StationarySeasonalArNeedsNone) {
    auto e = white(400, 8);
    std::vector<double> x(e.size(), 0.0);
    for (std::size_t t = 4; t < e.size(); ++t) x[t] = 0.5 * x[t - 4] + e[t];
    EXPECT_EQ(nsdiffs(x, 4), 0);
}

TEST(Nsdiffs, CriticalValueAtTwelve) {
    EXPECT_NEAR(ocsb_critical_value(12), -1.803, 2e-3);
}
