#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "gratis/error.hpp"
#include "gratis/mar.hpp"
#include "gratis/parallel.hpp"
#include "gratis/random.hpp"

namespace gratis {

/// Built-in representative lengths per period, used when no pool or fixed
/// length is configured.
inline std::vector<int> default_length_pool(int period) {
    switch (period) {
        case 1: return {20, 30, 40};
        case 4: return {60, 90, 120};
        case 12: return {80, 200, 300};
        case 52: return {350, 900, 1600};
        default: {
            const int p = std::max(period, 1);
            return {std::max(20, 4 * p), std::max(40, 8 * p), std::max(60, 12 * p)};
        }
    }
}

struct LengthSampler {
    std::optional<int> fixed;
    std::vector<int> pool;  // empty => default_length_pool(period)

    static LengthSampler fixed_length(int n) { return LengthSampler{n, {}}; }
    static LengthSampler from_pool(std::vector<int> p) { return LengthSampler{std::nullopt, std::move(p)}; }

    int draw(Rng& rng, int period) const {
        if (fixed) return *fixed;
        const std::vector<int> p = pool.empty() ? default_length_pool(period) : pool;
        return p[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(p.size()) - 1))];
    }
};

struct GeneratorConfig {
    int period = 1;
    LengthSampler length;
    int k_max = 5;
    double coefficient_sd = 0.5;
    double sigma_log_mean = 0.1;
    double sigma_log_sd = 0.1;
    double p_d = 0.9;
    double p_D = 0.4;
    int ar_order_max = 2;
    int seasonal_ar_order_max = 1;
    int burn_in_factor = 10;
    int max_retries = 100;

    void validate() const {
        if (period < 1) throw InvalidArgument("period must be >= 1");
        if (k_max < 1) throw InvalidArgument("k_max must be >= 1");
        if (!(coefficient_sd > 0.0)) throw InvalidArgument("coefficient_sd must be positive");
        if (!(sigma_log_sd >= 0.0)) throw InvalidArgument("sigma_log_sd must be non-negative");
        if (p_d < 0.0 || p_d > 1.0 || p_D < 0.0 || p_D > 1.0) throw InvalidArgument("probabilities must be in [0,1]");
        if (ar_order_max < 1 || seasonal_ar_order_max < 0) throw InvalidArgument("invalid AR order bounds");
        if (length.fixed && *length.fixed < 1) throw InvalidArgument("length must be >= 1");
        for (int n : length.pool)
            if (n < 1) throw InvalidArgument("length pool entries must be >= 1");
    }

    std::size_t burn_in() const { return static_cast<std::size_t>(period) * burn_in_factor; }
};

inline MARModel sample_mar_parameters(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng = make_rng(seed);
    std::normal_distribution<double> coef(0.0, cfg.coefficient_sd);
    std::lognormal_distribution<double> sig(cfg.sigma_log_mean, cfg.sigma_log_sd);
    std::bernoulli_distribution bd(cfg.p_d), bD(cfg.p_D);

    const int K = uniform_int(rng, 1, cfg.k_max);
    MARModel m;
    std::vector<double> beta(K);
    for (int k = 0; k < K; ++k) {
        // beta ~ U(0,1); zero has probability ~2^-53 but would break positivity.
        do beta[k] = uniform01(rng); while (beta[k] <= 0.0);
    }
    const double bsum = std::accumulate(beta.begin(), beta.end(), 0.0);
    for (int k = 0; k < K; ++k) {
        SeasonalARComponent c;
        c.period = cfg.period;
        const int p = uniform_int(rng, 1, cfg.ar_order_max);
        for (int i = 0; i < p; ++i) c.ar_coeffs.push_back(coef(rng));
        if (cfg.period > 1) {
            const int P = uniform_int(rng, 0, cfg.seasonal_ar_order_max);
            for (int j = 0; j < P; ++j) c.seasonal_ar_coeffs.push_back(coef(rng));
        }
        c.sigma = sig(rng);
        c.d = bd(rng) ? 1 : 0;
        const bool D = bD(rng);
        c.D = (cfg.period > 1 && D) ? 1 : 0;
        m.components.push_back(std::move(c));
        m.weights.push_back(beta[k] / bsum);
    }
    // Renormalize so the weights sum to one up to rounding of a single division.
    double s = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    for (auto& w : m.weights) w /= s;
    return m;
}

namespace detail {

/// Samples models until one simulates without exploding.
inline TimeSeries simulate_with_retries(const GeneratorConfig& cfg, std::size_t n, std::uint64_t item_seed) {
    int failures = 0;
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t model_seed = derive_seed(item_seed, 2 * attempt);
        const std::uint64_t sim_seed = derive_seed(item_seed, 2 * attempt + 1);
        MARModel m = sample_mar_parameters(cfg, model_seed);
        try {
            return simulate_mar(m, n, cfg.burn_in(), sim_seed);
        } catch (const NonFiniteSample&) {
            if (++failures > cfg.max_retries)
                throw RetryExhausted("more than " + std::to_string(cfg.max_retries) +
                                     " consecutive explosive parameter draws");
        }
    }
}

}  // namespace detail

/// Item i uses the child stream derive_seed(seed, i), so output does not
/// depend on the number of workers.
inline std::vector<TimeSeries> generate_batch(const GeneratorConfig& cfg, std::size_t count, std::uint64_t seed,
                                              unsigned workers = 0) {
    cfg.validate();
    if (count < 1) throw InvalidArgument("count must be >= 1");
    std::vector<TimeSeries> out(count);
    parallel_for(
        count,
        [&](std::size_t i) {
            const std::uint64_t item_seed = derive_seed(seed, i);
            Rng rng = make_rng(derive_seed(item_seed, 0xffffffffULL));
            const int n = cfg.length.draw(rng, cfg.period);
            out[i] = detail::simulate_with_retries(cfg, static_cast<std::size_t>(n), item_seed);
        },
        workers);
    return out;
}

inline bool is_degenerate_scale(double sd, double max_abs) {
    return !(sd > 0.0) || !std::isfinite(sd) || sd <= 1e-13 * max_abs;
}

/// Centers and scales to unit sample standard deviation.
inline std::vector<double> standardize(const std::vector<double>& x) {
    if (x.size() < 2) throw TooShort("standardization needs at least 2 values");
    const double n = static_cast<double>(x.size());
    double mean = 0.0, max_abs = 0.0;
    for (double v : x) {
        mean += v;
        max_abs = std::max(max_abs, std::abs(v));
    }
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (is_degenerate_scale(sd, max_abs)) throw DegenerateSeries("series has zero variance");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
    return out;
}

inline TimeSeries standardize_series(const TimeSeries& ts) {
    TimeSeries out = ts;
    out.values = standardize(ts.values);
    return out;
}

struct MultiSeasonalSpec {
    std::vector<int> periods;
    std::optional<std::vector<double>> weights;
    int length = 0;

    void validate() const {
        if (periods.empty()) throw InvalidArgument("multi-seasonal spec needs at least one period");
        for (int p : periods)
            if (p < 1) throw InvalidArgument("periods must be >= 1");
        const int maxp = *std::max_element(periods.begin(), periods.end());
        if (length < maxp) throw InvalidArgument("length must be >= the largest period");
        if (weights) {
            if (weights->size() != periods.size()) throw InvalidArgument("one weight per period required");
            double s = 0.0;
            for (double w : *weights) {
                if (!(w > 0.0 && w < 1.0) && !(periods.size() == 1 && w == 1.0))
                    throw InvalidArgument("weights must lie in (0,1)");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("weights must sum to one");
        }
    }
};

/// Simulates one standardized series per period and returns their weighted sum.
inline TimeSeries generate_multiseasonal(const MultiSeasonalSpec& spec, const GeneratorConfig& tmpl,
                                         std::uint64_t seed) {
    spec.validate();
    const std::size_t M = spec.periods.size();
    std::vector<int> periods = spec.periods;
    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return periods[a] < periods[b]; });

    std::vector<double> w(M);
    if (spec.weights) {
        w = *spec.weights;
    } else {
        Rng rng = make_rng(derive_seed(seed, 0x5eedULL));
        double s = 0.0;
        for (auto& g : w) {
            do g = uniform01(rng); while (g <= 0.0);
            s += g;
        }
        for (auto& g : w) g /= s;
    }

    TimeSeries out;
    out.values.assign(static_cast<std::size_t>(spec.length), 0.0);
    OriginMeta meta;
    for (std::size_t r = 0; r < M; ++r) {
        const std::size_t i = order[r];
        GeneratorConfig cfg = tmpl;
        cfg.period = periods[i];
        cfg.length = LengthSampler::fixed_length(spec.length);
        cfg.validate();
        // Redraw on a constant component (possible for tiny lengths); bounded by the retry cap.
        std::vector<double> z;
        for (std::uint64_t attempt = 0;; ++attempt) {
            TimeSeries comp = detail::simulate_with_retries(cfg, static_cast<std::size_t>(spec.length),
                                                            derive_seed(seed, i, attempt));
            try {
                z = standardize(comp.values);
            } catch (const DegenerateSeries&) {
                if (static_cast<int>(attempt) >= cfg.max_retries) throw RetryExhausted("components keep degenerating");
                continue;
            }
            meta.seeds.push_back(comp.origin->seeds.front());
            meta.models.push_back(comp.origin->models.front());
            meta.burn_ins.push_back(cfg.burn_in());
            break;
        }
        for (std::size_t t = 0; t < z.size(); ++t) out.values[t] += w[i] * z[t];
        meta.weights.push_back(w[i]);
    }
    std::sort(periods.begin(), periods.end());
    out.periods = periods;
    if (M == 1) meta.weights.clear();
    out.origin = std::move(meta);
    return out;
}

}  // namespace gratis
