#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "mar.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace gratis {

struct TargetSpec {
    std::vector<std::string> names;
    std::vector<double> values;
    int period = 1;
    std::size_t length = 20;

    void validate() const {
        if (names.empty()) throw InvalidArgument("target needs at least one feature");
        if (names.size() != values.size()) throw InvalidArgument("target names and values differ in length");
        if (period < 1) throw InvalidArgument("target period must be >= 1");
        if (length < 2) throw InvalidArgument("target length must be >= 2");
        for (std::size_t i = 0; i < names.size(); ++i) {
            const FeatureInfo* info = find_feature_info(names[i]);
            if (!info) throw InvalidArgument("unknown feature name: " + names[i]);
            if (info->seasonal_only && period <= 1)
                throw InvalidArgument("feature " + names[i] + " needs a seasonal period");
            if (!std::isfinite(values[i])) throw InvalidArgument("target value for " + names[i] + " is not finite");
        }
    }
};

/// Fixed-structure genome: k_fixed blocks of
/// [beta, ar_1..ar_p, (seasonal ar), log sigma, d gene, D gene].
struct GenomeLayout {
    int period = 1;
    int k_fixed = 3;
    int p_fixed = 2;

    int seasonal_genes() const { return period > 1 ? 1 : 0; }
    std::size_t block() const { return static_cast<std::size_t>(1 + p_fixed + seasonal_genes() + 3); }
    std::size_t size() const { return block() * static_cast<std::size_t>(k_fixed); }

    std::pair<double, double> range(std::size_t gene) const {
        const std::size_t off = gene % block();
        const std::size_t p = static_cast<std::size_t>(p_fixed + seasonal_genes());
        if (off == 0) return {1e-3, 1.0};
        if (off <= p) return {-1.5, 1.5};
        if (off == p + 1) return {std::log(0.5), std::log(2.0)};
        return {0.0, 1.0};
    }
};

using Genome = std::vector<double>;

inline MARModel decode(const Genome& g, const GenomeLayout& L) {
    if (g.size() != L.size()) throw InvalidArgument("genome length does not match layout");
    MARModel m;
    const std::size_t B = L.block();
    double total = 0.0;
    for (int k = 0; k < L.k_fixed; ++k) total += std::max(g[static_cast<std::size_t>(k) * B], 0.0);
    for (int k = 0; k < L.k_fixed; ++k) {
        const double* b = g.data() + static_cast<std::size_t>(k) * B;
        SeasonalARComponent c;
        c.period = L.period;
        std::size_t i = 1;
        for (int j = 0; j < L.p_fixed; ++j) c.ar_coeffs.push_back(b[i++]);
        if (L.period > 1) c.seasonal_ar_coeffs.push_back(b[i++]);
        c.sigma = std::clamp(std::exp(b[i++]), 1e-4, 1e2);
        c.d = b[i++] >= 0.5 ? 1 : 0;
        c.D = (L.period > 1 && b[i] >= 0.5) ? 1 : 0;
        m.components.push_back(std::move(c));
        m.weights.push_back(total > 0.0 ? std::max(b[0], 0.0) / total : 1.0 / L.k_fixed);
    }
    return m;
}

/// Right inverse of decode for models that fit the layout.
inline Genome encode(const MARModel& m, const GenomeLayout& L) {
    if (static_cast<int>(m.components.size()) != L.k_fixed)
        throw InvalidArgument("model component count does not match layout");
    Genome g;
    g.reserve(L.size());
    for (std::size_t k = 0; k < m.components.size(); ++k) {
        const auto& c = m.components[k];
        if (static_cast<int>(c.ar_coeffs.size()) > L.p_fixed || c.seasonal_ar_coeffs.size() > 1)
            throw InvalidArgument("model AR order exceeds layout");
        g.push_back(m.weights[k]);
        for (int j = 0; j < L.p_fixed; ++j)
            g.push_back(j < static_cast<int>(c.ar_coeffs.size()) ? c.ar_coeffs[static_cast<std::size_t>(j)] : 0.0);
        if (L.period > 1) g.push_back(c.seasonal_ar_coeffs.empty() ? 0.0 : c.seasonal_ar_coeffs[0]);
        g.push_back(std::log(c.sigma));
        g.push_back(c.d ? 0.75 : 0.25);
        g.push_back(c.D ? 0.75 : 0.25);
    }
    return g;
}

struct GAConfig {
    std::size_t population = 30;
    int max_generations = 100;
    double crossover_prob = 0.8;
    double mutation_prob = 0.1;
    double mutation_scale = 0.1;
    std::size_t tournament = 3;
    std::size_t elitism = 1;
    double tolerance = -0.05;
    std::uint64_t seed = 0;
    int k_fixed = 3;
    int p_fixed = 2;
    int burn_in_factor = 10;
    std::size_t workers = 0;

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (population < 4) throw InvalidArgument("population must be >= 4");
        if (!prob(crossover_prob) || !prob(mutation_prob)) throw InvalidArgument("probabilities must lie in [0,1]");
        if (max_generations < 0) throw InvalidArgument("max_generations must be >= 0");
        if (tournament < 1) throw InvalidArgument("tournament size must be >= 1");
        if (elitism >= population) throw InvalidArgument("elitism must be smaller than the population");
        if (k_fixed < 1 || p_fixed < 0) throw InvalidArgument("invalid genome structure");
        if (!(mutation_scale >= 0.0)) throw InvalidArgument("mutation scale must be >= 0");
    }

    GenomeLayout layout(int period) const { return GenomeLayout{period, k_fixed, p_fixed}; }
};

struct Evaluation {
    double fitness = -std::numeric_limits<double>::infinity();
    std::vector<double> series;
    std::vector<std::optional<double>> features;  ///< aligned to the target names
};

/// -||F - target|| / c with c = ||target|| (1 when the target is ~0). Absent
/// features cost their full target value.
inline double fitness_from_features(const std::vector<std::optional<double>>& f, const std::vector<double>& target) {
    double c = 0.0, d = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        c += target[i] * target[i];
        const double diff = f[i] ? *f[i] - target[i] : target[i];
        d += diff * diff;
    }
    c = std::sqrt(c);
    if (c < 1e-9) c = 1.0;
    const double r = -std::sqrt(d) / c;
    return std::isfinite(r) ? r : -std::numeric_limits<double>::infinity();
}

inline Evaluation evaluate(const Genome& g, const TargetSpec& t, const GAConfig& cfg, std::uint64_t seed) {
    Evaluation ev;
    const MARModel m = decode(g, cfg.layout(t.period));
    TimeSeries ts;
    try {
        ts = simulate_mar(m, t.length, static_cast<std::size_t>(t.period) * cfg.burn_in_factor, seed);
    } catch (const NonFiniteSample&) {
        ev.features.assign(t.names.size(), std::nullopt);
        return ev;
    }
    ts.origin.reset();
    ts.periods = {t.period};
    const FeatureVector fv = compute_feature_vector(ts, t.names);
    for (const auto& n : t.names) ev.features.push_back(fv.get(n));
    ev.fitness = fitness_from_features(ev.features, t.values);
    ev.series = std::move(ts.values);
    return ev;
}

struct Individual {
    Genome genome;
    Evaluation eval;
};

using Population = std::vector<Individual>;

namespace ga_detail {

inline std::uint64_t ops_seed(std::uint64_t seed, std::uint64_t gen) { return derive_seed(seed, gen, 0xffffffffULL); }
inline std::uint64_t eval_seed(std::uint64_t seed, std::uint64_t gen, std::uint64_t i) { return derive_seed(seed, gen, i); }

/// Indices sorted best first; ties keep the lower index.
inline std::vector<std::size_t> ranking(const Population& pop) {
    std::vector<std::size_t> r(pop.size());
    std::iota(r.begin(), r.end(), std::size_t{0});
    std::stable_sort(r.begin(), r.end(),
                     [&](std::size_t a, std::size_t b) { return pop[a].eval.fitness > pop[b].eval.fitness; });
    return r;
}

inline void evaluate_all(Population& pop, std::size_t from, const TargetSpec& t, const GAConfig& cfg,
                         std::uint64_t gen) {
    parallel_for(pop.size() - from, [&](std::size_t k) {
        const std::size_t i = from + k;
        pop[i].eval = evaluate(pop[i].genome, t, cfg, eval_seed(cfg.seed, gen, i));
    }, cfg.workers);
}

}  // namespace ga_detail

/// Uniform draw over the gene box, evaluated as generation 0.
inline Population initial_population(const TargetSpec& t, const GAConfig& cfg) {
    const GenomeLayout L = cfg.layout(t.period);
    auto rng = make_rng(ga_detail::ops_seed(cfg.seed, 0));
    Population pop(cfg.population);
    for (auto& ind : pop) {
        ind.genome.resize(L.size());
        for (std::size_t j = 0; j < L.size(); ++j) {
            auto [lo, hi] = L.range(j);
            ind.genome[j] = lo + (hi - lo) * uniform01(rng);
        }
    }
    ga_detail::evaluate_all(pop, 0, t, cfg, 0);
    return pop;
}

/// Produces generation `gen` from its predecessor. Elites keep their genome
/// and recorded fitness; everyone else is freshly simulated.
inline Population evolve(const Population& pop, const TargetSpec& t, const GAConfig& cfg, std::uint64_t gen) {
    const GenomeLayout L = cfg.layout(t.period);
    auto rng = make_rng(ga_detail::ops_seed(cfg.seed, gen));
    const auto rank = ga_detail::ranking(pop);
    const std::size_t n = pop.size();

    Population next;
    next.reserve(n);
    for (std::size_t e = 0; e < cfg.elitism && e < n; ++e) next.push_back(pop[rank[e]]);
    const std::size_t elites = next.size();

    auto pick = [&] { return static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 1)); };
    auto tournament = [&]() -> const Genome& {
        std::size_t best = pick();
        for (std::size_t k = 1; k < cfg.tournament; ++k) {
            std::size_t c = pick();
            if (pop[c].eval.fitness > pop[best].eval.fitness || (pop[c].eval.fitness == pop[best].eval.fitness && c < best))
                best = c;
        }
        return pop[best].genome;
    };

    while (next.size() < n) {
        Genome a = tournament();
        Genome b = tournament();
        if (uniform01(rng) < cfg.crossover_prob) {
            for (std::size_t j = 0; j < a.size(); ++j) {
                auto [lo, hi] = L.range(j);
                const double u = -0.25 + 1.5 * uniform01(rng);
                const double ga = a[j], gb = b[j];
                a[j] = std::clamp(u * ga + (1.0 - u) * gb, lo, hi);
                b[j] = std::clamp(u * gb + (1.0 - u) * ga, lo, hi);
            }
        }
        for (Genome* g : {&a, &b}) {
            for (std::size_t j = 0; j < g->size(); ++j) {
                if (uniform01(rng) < cfg.mutation_prob) {
                    auto [lo, hi] = L.range(j);
                    (*g)[j] = std::clamp((*g)[j] + cfg.mutation_scale * (hi - lo) * std_normal(rng), lo, hi);
                }
            }
            if (next.size() < n) next.push_back(Individual{std::move(*g), {}});
        }
    }
    ga_detail::evaluate_all(next, elites, t, cfg, gen);
    return next;
}

struct ProgressEvent {
    int generation = 0;
    double best_fitness = 0.0;
    std::vector<std::optional<double>> best_feature_values;
    double elapsed_ms = 0.0;
};

struct TuneResult {
    TimeSeries series;
    MARModel model;
    Genome genome;
    std::vector<double> trace;  ///< best-so-far fitness per generation
    std::vector<std::optional<double>> features;
    double fitness = -std::numeric_limits<double>::infinity();
    int generations = 0;
};

inline TuneResult tune_to_target(const TargetSpec& target, const GAConfig& cfg,
                                 const std::function<void(const ProgressEvent&)>& progress = {}) {
    target.validate();
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const GenomeLayout L = cfg.layout(target.period);

    TuneResult res;
    Population pop = initial_population(target, cfg);
    std::optional<Individual> best;
    for (int gen = 0;; ++gen) {
        const auto& top = pop[ga_detail::ranking(pop).front()];
        if (!best || top.eval.fitness > best->eval.fitness) best = top;
        res.trace.push_back(best->eval.fitness);
        res.generations = gen;
        if (progress) {
            ProgressEvent ev;
            ev.generation = gen;
            ev.best_fitness = best->eval.fitness;
            ev.best_feature_values = best->eval.features;
            ev.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            progress(ev);
        }
        if (best->eval.fitness >= cfg.tolerance || gen >= cfg.max_generations) break;
        pop = evolve(pop, target, cfg, static_cast<std::uint64_t>(gen + 1));
    }

    res.genome = best->genome;
    res.model = decode(best->genome, L);
    res.fitness = best->eval.fitness;
    res.features = best->eval.features;
    res.series.values = best->eval.series;
    res.series.periods = {target.period};
    return res;
}

}  // namespace gratis
