#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gratis/error.hpp"
#include "gratis/random.hpp"

namespace gratis {

/// One seasonal ARIMA(p,d,0)(P,D,0)_m component of a mixture.
struct SeasonalARComponent {
    std::vector<double> ar_coeffs;           ///< theta_1..theta_p
    std::vector<double> seasonal_ar_coeffs;  ///< Theta_1..Theta_P
    int d = 0;
    int D = 0;
    int period = 1;
    double intercept = 0.0;
    double sigma = 1.0;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("component sigma must be positive");
        if (period < 1) throw InvalidArgument("component period must be >= 1");
        if (period == 1 && (!seasonal_ar_coeffs.empty() || D != 0))
            throw InvalidArgument("non-seasonal component cannot carry seasonal terms");
        if (d < 0 || d > 2) throw InvalidArgument("d must be in [0, 2]");
        if (D < 0 || D > 1) throw InvalidArgument("D must be in [0, 1]");
    }
};

struct MARModel {
    std::vector<SeasonalARComponent> components;
    std::vector<double> weights;  ///< alpha_k, sum to one

    std::size_t size() const { return components.size(); }

    int period() const { return components.empty() ? 1 : components.front().period; }

    void validate() const {
        if (components.empty()) throw InvalidArgument("MAR model needs at least one component");
        if (weights.size() != components.size()) throw InvalidArgument("weights/components size mismatch");
        double s = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw InvalidArgument("mixture weights must be positive");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("mixture weights must sum to one");
        for (const auto& c : components) {
            c.validate();
            if (c.period != components.front().period)
                throw InvalidArgument("all components must share the same period");
        }
    }
};

/// Enough to regenerate a series: simulate_mar(models[i], n, burn_ins[i], seeds[i]).
struct OriginMeta {
    std::vector<std::uint64_t> seeds;
    std::vector<std::size_t> burn_ins;
    std::vector<MARModel> models;  // one per seasonal period for aggregated series
    std::vector<double> weights;   // aggregation weights, empty for single-period series
};

struct TimeSeries {
    std::vector<double> values;
    std::vector<int> periods{1};
    std::optional<OriginMeta> origin;

    std::size_t size() const { return values.size(); }
    int max_period() const { return periods.empty() ? 1 : periods.back(); }

    void validate() const {
        if (values.empty()) throw InvalidArgument("time series is empty");
        if (periods.empty()) throw InvalidArgument("time series needs at least one period");
        if (periods.front() < 1) throw InvalidArgument("periods must be >= 1");
        if (!std::is_sorted(periods.begin(), periods.end())) throw InvalidArgument("periods must be sorted");
        for (double v : values)
            if (!std::isfinite(v)) throw InvalidArgument("time series contains non-finite values");
    }
};

namespace detail {

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline double double_factorial(int k) {  // k!! for k >= -1
    double r = 1.0;
    for (int i = k; i > 1; i -= 2) r *= i;
    return r;
}

inline double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace detail

/// Multiplies out (1 - sum theta_i B^i)(1 - sum Theta_j B^{jm})(1-B)^d (1-B^m)^D
/// and returns a_1..a_q with x_t = intercept + sum a_i x_{t-i} + sigma e_t.
inline std::vector<double> expand_component_to_ar(const SeasonalARComponent& c) {
    c.validate();
    const int m = c.period;
    std::vector<double> poly{1.0};

    std::vector<double> ar(c.ar_coeffs.size() + 1, 0.0);
    ar[0] = 1.0;
    for (std::size_t i = 0; i < c.ar_coeffs.size(); ++i) ar[i + 1] = -c.ar_coeffs[i];
    poly = detail::poly_mul(poly, ar);

    std::vector<double> sar(c.seasonal_ar_coeffs.size() * m + 1, 0.0);
    sar[0] = 1.0;
    for (std::size_t j = 0; j < c.seasonal_ar_coeffs.size(); ++j) sar[(j + 1) * m] = -c.seasonal_ar_coeffs[j];
    poly = detail::poly_mul(poly, sar);

    for (int i = 0; i < c.d; ++i) poly = detail::poly_mul(poly, {1.0, -1.0});
    for (int i = 0; i < c.D; ++i) {
        std::vector<double> sd(m + 1, 0.0);
        sd[0] = 1.0;
        sd[m] = -1.0;
        poly = detail::poly_mul(poly, sd);
    }

    std::vector<double> a(poly.size() - 1);
    for (std::size_t i = 1; i < poly.size(); ++i) a[i - 1] = poly[i] == 0.0 ? 0.0 : -poly[i];
    return a;
}

/// Expanded AR form of every component, plus the maximum lag.
struct ExpandedMAR {
    std::vector<std::vector<double>> ar;
    std::vector<double> intercept;
    std::vector<double> sigma;
    std::vector<double> weights;
    std::size_t max_lag = 0;

    explicit ExpandedMAR(const MARModel& m) {
        m.validate();
        for (const auto& c : m.components) {
            ar.push_back(expand_component_to_ar(c));
            intercept.push_back(c.intercept);
            sigma.push_back(c.sigma);
            max_lag = std::max(max_lag, ar.back().size());
        }
        weights = m.weights;
    }

    /// Component means given history (back() = most recent observation).
    std::vector<double> component_means(const std::vector<double>& history) const {
        if (history.size() < max_lag)
            throw InsufficientHistory("history has " + std::to_string(history.size()) + " values, need " +
                                      std::to_string(max_lag));
        std::vector<double> mu(ar.size());
        const std::size_t h = history.size();
        for (std::size_t k = 0; k < ar.size(); ++k) {
            double s = intercept[k];
            for (std::size_t i = 0; i < ar[k].size(); ++i) s += ar[k][i] * history[h - 1 - i];
            mu[k] = s;
        }
        return mu;
    }
};

struct Moments {
    double mean;
    double variance;
};

inline Moments conditional_moments(const MARModel& m, const std::vector<double>& history) {
    ExpandedMAR e(m);
    auto mu = e.component_means(history);
    double mean = 0.0, within = 0.0, second = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        mean += e.weights[k] * mu[k];
        within += e.weights[k] * e.sigma[k] * e.sigma[k];
        second += e.weights[k] * mu[k] * mu[k];
    }
    double between = second - mean * mean;
    // Between-component spread is a variance; cancellation can make it a hair negative.
    if (between < 0.0) between = 0.0;
    return {mean, within + between};
}

/// m-th central moment of the one-step predictive Gaussian mixture, order <= 6.
inline double conditional_central_moment(const MARModel& m, const std::vector<double>& history, int order) {
    if (order < 1 || order > 6) throw InvalidArgument("central moment order must be in [1, 6]");
    ExpandedMAR e(m);
    auto mu = e.component_means(history);
    double mean = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) mean += e.weights[k] * mu[k];
    if (order == 1) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double delta = mu[k] - mean;
        double s = 0.0;
        for (int i = 0; i <= order; i += 2) {
            const double gauss = std::pow(e.sigma[k], i) * detail::double_factorial(i - 1);
            s += detail::binom(order, i) * gauss * std::pow(delta, order - i);
        }
        total += e.weights[k] * s;
    }
    return total;
}

inline constexpr double kExplosionLimit = 1e30;

/// Simulates burn_in + n steps from zero pre-sample values and returns the last n.
inline TimeSeries simulate_mar(const MARModel& m, std::size_t n, std::size_t burn_in, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("simulation length must be >= 1");
    ExpandedMAR e(m);
    const std::size_t K = e.ar.size();
    std::vector<double> cum(K);
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) cum[k] = (acc += e.weights[k]);

    const std::size_t lag = e.max_lag;
    const std::size_t total = burn_in + n;
    std::vector<double> buf(lag + total, 0.0);

    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (std::size_t t = lag; t < lag + total; ++t) {
        const double u = unif(rng);
        std::size_t k = 0;
        while (k + 1 < K && u >= cum[k]) ++k;
        const auto& a = e.ar[k];
        double mu = e.intercept[k];
        for (std::size_t i = 0; i < a.size(); ++i) mu += a[i] * buf[t - 1 - i];
        const double x = mu + e.sigma[k] * norm(rng);
        if (!std::isfinite(x) || std::abs(x) > kExplosionLimit)
            throw NonFiniteSample("simulated value left the representable range at step " +
                                  std::to_string(t - lag));
        buf[t] = x;
    }
    TimeSeries ts;
    ts.values.assign(buf.end() - static_cast<std::ptrdiff_t>(n), buf.end());
    ts.periods = {m.period()};
    ts.origin = OriginMeta{{seed}, {burn_in}, {m}, {}};
    return ts;
}

}  // namespace gratis
