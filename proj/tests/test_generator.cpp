#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include "gratis/features.hpp"
#include "gratis/generator.hpp"

using namespace gratis;

TEST(SampleParameters, SingleComponentWhenKmaxIsOne) {
    GeneratorConfig cfg;
    cfg.k_max = 1;
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto m = sample_mar_parameters(cfg, s);
        ASSERT_EQ(m.size(), 1u);
        EXPECT_EQ(m.weights[0], 1.0);
    }
}

TEST(SampleParameters, BernoulliAndLognormalMarginals) {
    GeneratorConfig cfg;
    cfg.period = 12;
    long comps = 0, d1 = 0, D1 = 0;
    double sig_sum = 0.0, sig_sq = 0.0;
    std::vector<long> kcount(6, 0);
    for (std::uint64_t s = 0; s < 10000; ++s) {
        auto m = sample_mar_parameters(cfg, derive_seed(1234, s));
        kcount[m.size()]++;
        double ws = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
        ASSERT_NEAR(ws, 1.0, 1e-12);
        for (const auto& c : m.components) {
            ++comps;
            d1 += c.d;
            D1 += c.D;
            sig_sum += c.sigma;
            sig_sq += c.sigma * c.sigma;
            ASSERT_GE(c.ar_coeffs.size(), 1u);
            ASSERT_LE(c.ar_coeffs.size(), 2u);
            ASSERT_LE(c.seasonal_ar_coeffs.size(), 1u);
        }
    }
    const double n = static_cast<double>(comps);
    EXPECT_NEAR(d1 / n, 0.9, 0.02);
    EXPECT_NEAR(D1 / n, 0.4, 0.02);
    const double mean = sig_sum / n;
    const double sd = std::sqrt(sig_sq / n - mean * mean);
    EXPECT_NEAR(mean, std::exp(0.1 + 0.005), 2.0 * sd / std::sqrt(n));

    // Chi-square goodness of fit for K ~ U{1..5}; 4 dof, p = 0.001 cut at 18.467.
    double chi = 0.0;
    for (int k = 1; k <= 5; ++k) chi += std::pow(kcount[k] - 2000.0, 2) / 2000.0;
    EXPECT_LT(chi, 18.467);
}

TEST(SampleParameters, NoSeasonalTermsForPeriodOne) {
    GeneratorConfig cfg;
    for (std::uint64_t s = 0; s < 500; ++s) {
        auto m = sample_mar_parameters(cfg, s);
        for (const auto& c : m.components) {
            EXPECT_EQ(c.D, 0);
            EXPECT_TRUE(c.seasonal_ar_coeffs.empty());
        }
    }
}

TEST(GenerateBatch, LengthsPeriodsAndFiniteness) {
    for (int period : {1, 4, 12, 52}) {
        GeneratorConfig cfg;
        cfg.period = period;
        auto batch = generate_batch(cfg, 40, 77);
        auto pool = default_length_pool(period);
        for (const auto& ts : batch) {
            EXPECT_NE(std::find(pool.begin(), pool.end(), static_cast<int>(ts.size())), pool.end());
            EXPECT_EQ(ts.periods, std::vector<int>{period});
            for (double v : ts.values) ASSERT_TRUE(std::isfinite(v));
        }
    }
}

TEST(GenerateBatch, DeterministicAndWorkerIndependent) {
    GeneratorConfig cfg;
    cfg.period = 4;
    auto a = generate_batch(cfg, 30, 5, 1);
    auto b = generate_batch(cfg, 30, 5, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
}

TEST(GenerateBatch, MetadataRegeneratesSeries) {
    GeneratorConfig cfg;
    cfg.period = 12;
    auto batch = generate_batch(cfg, 5, 99);
    for (const auto& ts : batch) {
        ASSERT_TRUE(ts.origin);
        auto again = simulate_mar(ts.origin->models[0], ts.size(), ts.origin->burn_ins[0], ts.origin->seeds[0]);
        EXPECT_EQ(again.values, ts.values);
        EXPECT_EQ(ts.origin->burn_ins[0], 120u);
    }
}

TEST(GenerateBatch, RejectsZeroCount) {
    EXPECT_THROW(generate_batch(GeneratorConfig{}, 0, 1), InvalidArgument);
}

TEST(GenerateBatch, RetryCapOnPathologicalConfig) {
    GeneratorConfig cfg;
    cfg.coefficient_sd = 1e6;  // essentially every draw explodes
    cfg.k_max = 1;
    cfg.p_d = 1.0;
    cfg.length = LengthSampler::fixed_length(400);
    EXPECT_THROW(generate_batch(cfg, 1, 3), RetryExhausted);
}

TEST(GenerateBatch, ThousandYearlyIsFast) {
    GeneratorConfig cfg;
    cfg.length = LengthSampler::fixed_length(20);
    const auto t0 = std::chrono::steady_clock::now();
    auto batch = generate_batch(cfg, 1000, 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(batch.size(), 1000u);
    EXPECT_LT(secs, 10.0);
}

TEST(Standardize, HandExample) {
    auto z = standardize({1.0, 2.0, 3.0});
    EXPECT_NEAR(z[0], -1.0, 1e-12);
    EXPECT_NEAR(z[1], 0.0, 1e-12);
    EXPECT_NEAR(z[2], 1.0, 1e-12);
}

TEST(Standardize, IdempotentAndDegenerate) {
    std::vector<double> x{0.3, -1.2, 2.2, 0.7, 5.0, -0.4};
    auto z = standardize(x);
    auto z2 = standardize(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(z[i], z2[i], 1e-12);
    EXPECT_THROW(standardize({4.0, 4.0, 4.0}), DegenerateSeries);
}

TEST(MultiSeasonal, SinglePeriodEqualsStandardizedComponent) {
    GeneratorConfig tmpl;
    MultiSeasonalSpec spec{{12}, std::nullopt, 120};
    auto ts = generate_multiseasonal(spec, tmpl, 8);
    ASSERT_TRUE(ts.origin);
    auto comp = simulate_mar(ts.origin->models[0], 120, ts.origin->burn_ins[0], ts.origin->seeds[0]);
    auto z = standardize(comp.values);
    EXPECT_EQ(ts.values, z);
}

TEST(MultiSeasonal, SuppliedWeightsAreExactlyLinear) {
    GeneratorConfig tmpl;
    MultiSeasonalSpec spec{{4, 12}, std::vector<double>{0.5, 0.5}, 200};
    auto ts = generate_multiseasonal(spec, tmpl, 21);
    ASSERT_EQ(ts.periods, (std::vector<int>{4, 12}));
    std::vector<std::vector<double>> z;
    for (std::size_t i = 0; i < 2; ++i)
        z.push_back(standardize(
            simulate_mar(ts.origin->models[i], 200, ts.origin->burn_ins[i], ts.origin->seeds[i]).values));
    for (std::size_t t = 0; t < 200; ++t) EXPECT_EQ(ts.values[t], 0.5 * z[0][t] + 0.5 * z[1][t]);
}

TEST(MultiSeasonal, DrawnWeightsSumToOne) {
    GeneratorConfig tmpl;
    MultiSeasonalSpec spec{{4, 12, 52}, std::nullopt, 300};
    auto ts = generate_multiseasonal(spec, tmpl, 2);
    double s = 0.0;
    for (double w : ts.origin->weights) {
        EXPECT_GT(w, 0.0);
        s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(MultiSeasonal, BothPeriodicitiesVisible) {
    // Seasonally integrated components without ordinary differencing, so that
    // neither seasonal pattern is swamped by a stochastic trend.
    GeneratorConfig tmpl;
    tmpl.p_d = 0.0;
    tmpl.p_D = 1.0;
    int both = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        MultiSeasonalSpec spec{{48, 336}, std::vector<double>{0.5, 0.5}, 1680};
        auto ts = generate_multiseasonal(spec, tmpl, seed);
        auto z = standardize(ts.values);
        auto f = stl_feature_set(stl_decompose_multi(z, ts.periods), ts.periods);
        ASSERT_EQ(f.seasonal_strength.size(), 2u);
        if (f.seasonal_strength[0] > 0.3 && f.seasonal_strength[1] > 0.3) ++both;
    }
    EXPECT_GE(both, 16);
}
