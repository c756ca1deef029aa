#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <gratis/ga.hpp>
#include <gratis/generator.hpp>

using namespace gratis;

namespace {

const std::vector<std::string> kSetA{"ndiffs", "x.acf1", "entropy", "trend"};

Genome random_genome(const GenomeLayout& L, Rng& rng) {
    Genome g(L.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        auto [lo, hi] = L.range(j);
        g[j] = lo + (hi - lo) * uniform01(rng);
    }
    return g;
}

TargetSpec target_from_series(const std::vector<double>& x, int period) {
    TargetSpec t;
    t.names = kSetA;
    t.period = period;
    t.length = x.size();
    auto fv = compute_feature_vector(x, {period});
    for (auto& n : t.names) t.values.push_back(fv.get(n).value());
    return t;
}

}  // namespace

TEST(Decode, EqualBetasGiveUniformWeights) {
    GenomeLayout L{12, 3, 2};
    Genome g(L.size(), 0.3);
    auto m = decode(g, L);
    ASSERT_EQ(m.weights.size(), 3u);
    for (double w : m.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(m.components[0].seasonal_ar_coeffs.size(), 1u);
    EXPECT_EQ(L.block(), 7u);
}

TEST(Decode, DifferencingGeneThreshold) {
    GenomeLayout L{4, 1, 1};
    // [beta, ar1, sar1, log sigma, d, D]
    Genome g{0.5, 0.1, 0.2, 0.0, 0.49, 0.5};
    auto m = decode(g, L);
    EXPECT_EQ(m.components[0].d, 0);
    EXPECT_EQ(m.components[0].D, 1);
    g[4] = 0.5;
    g[5] = 0.49;
    m = decode(g, L);
    EXPECT_EQ(m.components[0].d, 1);
    EXPECT_EQ(m.components[0].D, 0);
    EXPECT_DOUBLE_EQ(m.components[0].sigma, 1.0);
}

TEST(Decode, NonSeasonalLayoutNeverSetsSeasonalDifference) {
    GenomeLayout L{1, 2, 1};
    Genome g(L.size(), 0.9);
    auto m = decode(g, L);
    for (auto& c : m.components) {
        EXPECT_EQ(c.D, 0);
        EXPECT_TRUE(c.seasonal_ar_coeffs.empty());
    }
    EXPECT_THROW(decode(Genome(3, 0.1), L), InvalidArgument);
}

TEST(Decode, EncodeRoundTrip) {
    auto rng = make_rng(1);
    for (int period : {1, 12}) {
        GenomeLayout L{period, 3, 2};
        for (int r = 0; r < 100; ++r) {
            auto m = decode(random_genome(L, rng), L);
            auto back = decode(encode(m, L), L);
            for (std::size_t k = 0; k < 3; ++k) {
                EXPECT_NEAR(back.weights[k], m.weights[k], 1e-12);
                EXPECT_EQ(back.components[k].ar_coeffs, m.components[k].ar_coeffs);
                EXPECT_EQ(back.components[k].d, m.components[k].d);
                EXPECT_EQ(back.components[k].D, m.components[k].D);
                EXPECT_NEAR(back.components[k].sigma, m.components[k].sigma, 1e-12);
            }
        }
    }
}

TEST(Decode, FuzzedGenomesDecodeToValidModels) {
    auto rng = make_rng(2);
    for (int period : {1, 4, 12}) {
        GenomeLayout L{period, 3, 2};
        for (int r = 0; r < 10000 / 3; ++r) {
            auto m = decode(random_genome(L, rng), L);
            EXPECT_NO_THROW(m.validate());
        }
    }
}

TEST(Fitness, ExactMatchAndZeroTarget) {
    EXPECT_EQ(fitness_from_features({1.0, 0.5}, {1.0, 0.5}), 0.0);
    EXPECT_DOUBLE_EQ(fitness_from_features({3.0, 4.0}, {0.0, 0.0}), -5.0);
    // absent feature: distance term is the target value itself
    EXPECT_DOUBLE_EQ(fitness_from_features({std::nullopt, 4.0}, {3.0, 4.0}), -3.0 / 5.0);
    EXPECT_LE(fitness_from_features({0.2, 0.9}, {0.1, 0.7}), 0.0);
}

TEST(Fitness, ExplosiveModelGetsWorstSentinel) {
    GenomeLayout L{1, 1, 2};
    Genome g{1.0, 1.5, 1.5, std::log(2.0), 1.0, 0.0};
    TargetSpec t;
    t.names = {"x.acf1"};
    t.values = {0.5};
    t.length = 500;
    GAConfig cfg;
    cfg.k_fixed = 1;
    cfg.burn_in_factor = 1000;
    auto ev = evaluate(g, t, cfg, 3);
    EXPECT_EQ(ev.fitness, -std::numeric_limits<double>::infinity());
}

TEST(Fitness, OwnEncodingScoresWellOnItsTarget) {
    // Period 12, length 120, scored against its own features on a fresh
    // simulation. A pilot over 200 models gives 171 above -0.5; the misses are
    // ndiffs flipping between 0 and 1, which alone costs about 0.67.
    int good = 0;
    GAConfig cfg;
    for (std::uint64_t s = 0; s < 50; ++s) {
        MARModel m;
        SeasonalARComponent c;
        auto rng = make_rng(100 + s);
        c.period = 12;
        c.ar_coeffs = {-0.6 + 1.2 * uniform01(rng)};
        c.seasonal_ar_coeffs = {-0.6 + 1.2 * uniform01(rng)};
        c.sigma = 1.0;
        c.d = uniform01(rng) < 0.5;
        c.D = uniform01(rng) < 0.5;
        for (int k = 0; k < 3; ++k) m.components.push_back(c);
        m.weights = {0.5, 0.3, 0.2};
        auto x = simulate_mar(m, 120, 120, derive_seed(s, 1));
        auto t = target_from_series(x.values, 12);
        auto ev = evaluate(encode(m, cfg.layout(12)), t, cfg, derive_seed(s, 2));
        if (ev.fitness > -0.5) ++good;
    }
    EXPECT_GE(good, 40);
}

TEST(TargetSpec, Validation) {
    TargetSpec t;
    t.names = {"trend", "seasonal.strength"};
    t.values = {0.9, 0.9};
    t.period = 1;
    EXPECT_THROW(t.validate(), InvalidArgument);
    t.period = 12;
    EXPECT_NO_THROW(t.validate());
    t.names[0] = "bogus";
    EXPECT_THROW(t.validate(), InvalidArgument);
    t.names = {"trend"};
    EXPECT_THROW(t.validate(), InvalidArgument);
}

TEST(Evolve, NoVariationKeepsGenomesAndElite) {
    TargetSpec t;
    t.names = kSetA;
    t.values = {1.0, 0.8, 0.7, 0.9};
    GAConfig cfg;
    cfg.crossover_prob = 0.0;
    cfg.mutation_prob = 0.0;
    cfg.seed = 5;
    auto pop = initial_population(t, cfg);
    auto next = evolve(pop, t, cfg, 1);
    ASSERT_EQ(next.size(), pop.size());
    for (auto& ind : next) {
        bool found = false;
        for (auto& old : pop) found = found || old.genome == ind.genome;
        EXPECT_TRUE(found);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
        if (pop[i].eval.fitness > pop[best].eval.fitness) best = i;
    EXPECT_EQ(next[0].genome, pop[best].genome);
    EXPECT_EQ(next[0].eval.fitness, pop[best].eval.fitness);
    EXPECT_EQ(next[0].eval.series, pop[best].eval.series);
}

TEST(Tune, TraceMonotoneAndDeterministic) {
    TargetSpec t;
    t.names = kSetA;
    t.values = {1.0, 0.8, 0.7, 0.9};
    GAConfig cfg;
    cfg.seed = 9;
    cfg.max_generations = 15;
    cfg.tolerance = 0.0;
    std::vector<int> gens;
    auto a = tune_to_target(t, cfg, [&](const ProgressEvent& e) { gens.push_back(e.generation); });
    ASSERT_EQ(a.trace.size(), 16u);
    for (std::size_t i = 1; i < a.trace.size(); ++i) EXPECT_GE(a.trace[i], a.trace[i - 1]);
    for (std::size_t i = 0; i < gens.size(); ++i) EXPECT_EQ(gens[i], static_cast<int>(i));
    auto b = tune_to_target(t, cfg);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.series.values, b.series.values);
    EXPECT_EQ(a.genome, b.genome);
    EXPECT_EQ(a.series.values.size(), 20u);
}

TEST(Tune, InfiniteToleranceStopsAtGenerationZero) {
    TargetSpec t;
    t.names = {"x.acf1"};
    t.values = {0.5};
    GAConfig cfg;
    cfg.tolerance = -std::numeric_limits<double>::infinity();
    auto r = tune_to_target(t, cfg);
    EXPECT_EQ(r.generations, 0);
    EXPECT_EQ(r.trace.size(), 1u);
}

TEST(Tune, RecoversGeneratedYearlyTarget) {
    GeneratorConfig gc;
    gc.period = 1;
    gc.length = LengthSampler::fixed_length(20);
    int ok = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto x = generate_batch(gc, 1, 500 + s, 1).front();
        auto t = target_from_series(x.values, 1);
        GAConfig cfg;
        cfg.seed = s;
        auto r = tune_to_target(t, cfg);
        if (r.fitness >= -0.1) ++ok;
    }
    EXPECT_GE(ok, 4);
}

TEST(Config, Validation) {
    GAConfig c;
    c.population = 3;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = GAConfig{};
    c.mutation_prob = 1.5;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = GAConfig{};
    c.elitism = 30;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
