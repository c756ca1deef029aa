#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "features.hpp"
#include "instance_space.hpp"
#include "mar.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "stl.hpp"

namespace gratis {

enum class ForecastMethod { naive, snaive, rw_drift, theta, mean, ar };

inline const std::vector<ForecastMethod>& all_methods() {
    static const std::vector<ForecastMethod> m{ForecastMethod::naive, ForecastMethod::snaive, ForecastMethod::rw_drift,
                                               ForecastMethod::theta, ForecastMethod::mean,   ForecastMethod::ar};
    return m;
}

inline std::string to_string(ForecastMethod m) {
    switch (m) {
        case ForecastMethod::naive: return "naive";
        case ForecastMethod::snaive: return "snaive";
        case ForecastMethod::rw_drift: return "rw_drift";
        case ForecastMethod::theta: return "theta";
        case ForecastMethod::mean: return "mean";
        case ForecastMethod::ar: return "ar";
    }
    return "?";
}

inline ForecastMethod parse_method(const std::string& s) {
    for (auto m : all_methods())
        if (to_string(m) == s) return m;
    throw InvalidArgument("unknown forecast method: " + s);
}

namespace forecast_detail {

inline std::vector<double> repeat(double v, std::size_t h) { return std::vector<double>(h, v); }

/// Simple exponential smoothing with the level started at the first value;
/// returns (alpha, final level) minimizing one-step SSE over a 0.01 grid.
inline std::pair<double, double> ses(const std::vector<double>& x) {
    double best_sse = std::numeric_limits<double>::infinity(), best_a = 1.0, best_l = x.back();
    for (int k = 1; k <= 99; ++k) {
        const double a = k / 100.0;
        double l = x[0], sse = 0.0;
        for (std::size_t t = 1; t < x.size(); ++t) {
            const double e = x[t] - l;
            sse += e * e;
            l += a * e;
        }
        if (sse < best_sse) {
            best_sse = sse;
            best_a = a;
            best_l = l;
        }
    }
    return {best_a, best_l};
}

inline std::vector<double> theta(const std::vector<double>& x, int m, std::size_t h) {
    const std::size_t n = x.size();
    std::vector<double> adj = x, season;
    if (m > 1 && n >= static_cast<std::size_t>(2 * m + 4)) {
        auto d = stl_decompose_multi(x, {m});
        season = d.seasonal.front();
        for (std::size_t t = 0; t < n; ++t) adj[t] -= season[t];
    }
    // least-squares slope on 0..n-1
    const double tbar = (static_cast<double>(n) - 1.0) / 2.0;
    const double ybar = stats::mean(adj);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        sxy += (static_cast<double>(t) - tbar) * (adj[t] - ybar);
        sxx += (static_cast<double>(t) - tbar) * (static_cast<double>(t) - tbar);
    }
    const double b = sxx > 0.0 ? sxy / sxx : 0.0;
    const double level = ses(adj).second;
    std::vector<double> f(h);
    for (std::size_t j = 0; j < h; ++j) {
        f[j] = level + 0.5 * b * static_cast<double>(j + 1);
        if (!season.empty()) f[j] += season[n - static_cast<std::size_t>(m) + j % static_cast<std::size_t>(m)];
    }
    return f;
}

/// AR(p) with intercept by least squares; p chosen by AIC on a common sample.
inline std::vector<double> ar(const std::vector<double>& x, std::size_t h) {
    const std::size_t n = x.size();
    const std::size_t pmax = std::min<std::size_t>(10, n / 5);
    const std::size_t N = n - pmax;
    Eigen::VectorXd y(static_cast<Eigen::Index>(N));
    for (std::size_t t = 0; t < N; ++t) y(static_cast<Eigen::Index>(t)) = x[pmax + t];

    double best_aic = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_beta = Eigen::VectorXd::Constant(1, stats::mean(x));
    std::size_t best_p = 0;
    for (std::size_t p = 0; p <= pmax; ++p) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p + 1));
        for (std::size_t t = 0; t < N; ++t) {
            X(static_cast<Eigen::Index>(t), 0) = 1.0;
            for (std::size_t i = 1; i <= p; ++i)
                X(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = x[pmax + t - i];
        }
        try {
            auto r = stats::ols(X, y);
            const double s2 = std::max(r.rss / static_cast<double>(N), 1e-300);
            const double aic = static_cast<double>(N) * std::log(s2) + 2.0 * static_cast<double>(p + 1);
            if (aic < best_aic - 1e-12) {
                best_aic = aic;
                best_beta = r.beta;
                best_p = p;
            }
        } catch (const SingularDesign&) {
        }
    }
    std::vector<double> path = x;
    std::vector<double> f(h);
    for (std::size_t j = 0; j < h; ++j) {
        double v = best_beta(0);
        for (std::size_t i = 1; i <= best_p; ++i) v += best_beta(static_cast<Eigen::Index>(i)) * path[path.size() - i];
        f[j] = v;
        path.push_back(v);
    }
    return f;
}

}  // namespace forecast_detail

/// Point forecasts for steps 1..h. `period` is the seasonal period of `train`.
inline std::vector<double> forecast(ForecastMethod method, const std::vector<double>& train, int period, std::size_t h) {
    if (h < 1) throw InvalidArgument("horizon must be positive");
    if (train.size() < 3) throw TooShort("forecasting needs at least 3 observations");
    for (double v : train)
        if (!std::isfinite(v)) throw InvalidArgument("training data must be finite");
    const std::size_t n = train.size();
    const int m = std::max(period, 1);
    switch (method) {
        case ForecastMethod::naive: return forecast_detail::repeat(train.back(), h);
        case ForecastMethod::snaive: {
            if (m == 1) return forecast_detail::repeat(train.back(), h);
            if (n < static_cast<std::size_t>(m)) throw TooShort("seasonal naive needs one full cycle");
            std::vector<double> f(h);
            for (std::size_t j = 0; j < h; ++j) f[j] = train[n - static_cast<std::size_t>(m) + j % static_cast<std::size_t>(m)];
            return f;
        }
        case ForecastMethod::rw_drift: {
            const double drift = (train.back() - train.front()) / static_cast<double>(n - 1);
            std::vector<double> f(h);
            for (std::size_t j = 0; j < h; ++j) f[j] = train.back() + drift * static_cast<double>(j + 1);
            return f;
        }
        case ForecastMethod::theta: return forecast_detail::theta(train, m, h);
        case ForecastMethod::mean: return forecast_detail::repeat(stats::mean(train), h);
        case ForecastMethod::ar: return forecast_detail::ar(train, h);
    }
    throw InvalidArgument("unknown forecast method");
}

inline std::vector<double> forecast(ForecastMethod method, const TimeSeries& train, std::size_t h) {
    return forecast(method, train.values, train.max_period(), h);
}

/// Mean absolute error scaled by the in-sample seasonal-naive MAE.
inline double mase(const std::vector<double>& actuals, const std::vector<double>& forecasts,
                   const std::vector<double>& insample, int period = 1) {
    if (actuals.size() != forecasts.size() || actuals.empty())
        throw InvalidArgument("actuals and forecasts must be nonempty and equal length");
    const std::size_t m = static_cast<std::size_t>(std::max(period, 1));
    if (insample.size() <= m) throw TooShort("in-sample must be longer than the period");
    double denom = 0.0;
    for (std::size_t t = m; t < insample.size(); ++t) denom += std::abs(insample[t] - insample[t - m]);
    denom /= static_cast<double>(insample.size() - m);
    if (!(denom > 0.0)) throw ZeroScale("in-sample seasonal naive error is zero");
    double num = 0.0;
    for (std::size_t j = 0; j < actuals.size(); ++j) num += std::abs(actuals[j] - forecasts[j]);
    return num / static_cast<double>(actuals.size()) / denom;
}

struct HorizonTable {
    std::map<int, int> by_period{{1, 6}, {4, 8}, {12, 18}, {52, 13}};

    int operator()(int period) const {
        auto it = by_period.find(period);
        return it != by_period.end() ? it->second : std::max(6, 2 * period);
    }
};

inline std::size_t min_train_length(int period) { return std::max<std::size_t>(8, 2 * static_cast<std::size_t>(std::max(period, 1))); }

struct SplitSeries {
    std::vector<double> train;
    std::vector<double> test;
    int period = 1;
};

inline SplitSeries split_series(const TimeSeries& ts, std::size_t h) {
    const std::size_t n = ts.values.size();
    const int m = ts.max_period();
    if (n < h + min_train_length(m)) throw TooShort("series too short for its horizon");
    SplitSeries s;
    s.period = m;
    s.train.assign(ts.values.begin(), ts.values.end() - static_cast<std::ptrdiff_t>(h));
    s.test.assign(ts.values.end() - static_cast<std::ptrdiff_t>(h), ts.values.end());
    return s;
}

struct TrainingTable {
    FeatureMatrix features;
    std::vector<ForecastMethod> methods;
    std::vector<std::vector<double>> mase;  ///< rows x methods
    std::vector<int> horizons;
    std::vector<std::string> log;           ///< one entry per skipped series
};

inline TrainingTable build_training_table(const std::vector<TimeSeries>& corpus,
                                          const std::vector<std::string>& ids = {},
                                          const HorizonTable& horizons = {},
                                          const std::vector<ForecastMethod>& methods = all_methods(),
                                          std::size_t workers = 0) {
    if (!ids.empty() && ids.size() != corpus.size()) throw InvalidArgument("ids and corpus differ in length");
    struct Row {
        std::optional<FeatureVector> fv;
        std::vector<double> mase;
        int h = 0;
        std::string error;
    };
    std::vector<Row> rows(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) {
        Row& r = rows[i];
        try {
            const TimeSeries& ts = corpus[i];
            ts.validate();
            r.h = horizons(ts.max_period());
            auto sp = split_series(ts, static_cast<std::size_t>(r.h));
            for (auto m : methods)
                r.mase.push_back(gratis::mase(sp.test, forecast(m, sp.train, sp.period, sp.test.size()), sp.train, sp.period));
            TimeSeries tr;
            tr.values = sp.train;
            tr.periods = ts.periods;
            r.fv = compute_feature_vector(tr);
        } catch (const Error& e) {
            r.error = std::string(e.what());
        }
    }, workers);

    TrainingTable out;
    out.methods = methods;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string id = ids.empty() ? std::to_string(i) : ids[i];
        if (!rows[i].fv) {
            out.log.push_back(id + ": skipped: " + rows[i].error);
            continue;
        }
        if (!out.features.columns.empty() && rows[i].fv->names != out.features.columns) {
            out.log.push_back(id + ": skipped: feature layout differs from the first row");
            continue;
        }
        out.features.add(id, *rows[i].fv);
        out.mase.push_back(std::move(rows[i].mase));
        out.horizons.push_back(rows[i].h);
    }
    return out;
}

}  // namespace gratis
