#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gratis/error.hpp"
#include "gratis/garch.hpp"
#include "gratis/generator.hpp"
#include "gratis/mar.hpp"
#include "gratis/stats.hpp"
#include "gratis/stl.hpp"
#include "gratis/unitroot.hpp"

namespace gratis {

// ---------------------------------------------------------------------------
// Autocorrelation features
// ---------------------------------------------------------------------------

struct AcfFeatures {
    double x_acf1, x_acf10, diff1_acf1, diff1_acf10, diff2_acf1, diff2_acf10, seas_acf1;
};

inline AcfFeatures acf_feature_set(const std::vector<double>& x, int period) {
    if (x.size() < 13) throw TooShort("acf features need at least 13 values");
    const auto m = static_cast<std::size_t>(std::max(period, 1));
    const auto a = stats::acf(x, std::max<std::size_t>(10, m));
    const auto a1 = stats::acf(stats::diff(x), 10);
    const auto a2 = stats::acf(stats::diff(x, 1, 2), 10);
    AcfFeatures f{};
    f.x_acf1 = a[1];
    f.x_acf10 = stats::sum_sq(a, 1, 10);
    f.diff1_acf1 = a1[1];
    f.diff1_acf10 = stats::sum_sq(a1, 1, 10);
    f.diff2_acf1 = a2[1];
    f.diff2_acf10 = stats::sum_sq(a2, 1, 10);
    f.seas_acf1 = (m > 1 && m < x.size()) ? a[m] : 0.0;
    return f;
}

struct PacfFeatures {
    double x_pacf5, diff1_pacf5, diff2_pacf5, seas_pacf;
};

inline PacfFeatures pacf_feature_set(const std::vector<double>& x, int period) {
    if (x.size() < 13) throw TooShort("pacf features need at least 13 values");
    const auto m = static_cast<std::size_t>(std::max(period, 1));
    const bool seasonal = m > 1 && m < x.size() - 1;
    const auto p = stats::pacf(x, seasonal ? std::max<std::size_t>(5, m) : 5);
    const auto p1 = stats::pacf(stats::diff(x), 5);
    const auto p2 = stats::pacf(stats::diff(x, 1, 2), 5);
    PacfFeatures f{};
    f.x_pacf5 = stats::sum_sq(p, 0, 4);
    f.diff1_pacf5 = stats::sum_sq(p1, 0, 4);
    f.diff2_pacf5 = stats::sum_sq(p2, 0, 4);
    f.seas_pacf = seasonal ? p[m - 1] : 0.0;
    return f;
}

// ---------------------------------------------------------------------------
// Spectral features
// ---------------------------------------------------------------------------

/// Raw periodogram of the demeaned series at Fourier frequencies 2 pi j / n,
/// j = 1..floor(n/2).
inline std::vector<double> periodogram(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const double m = stats::mean(x);
    std::vector<double> c(n), s(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        c[k] = std::cos(ang);
        s[k] = std::sin(ang);
    }
    const std::size_t nf = n / 2;
    std::vector<double> I(nf);
    for (std::size_t j = 1; j <= nf; ++j) {
        double re = 0.0, im = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = x[t] - m;
            re += v * c[idx];
            im -= v * s[idx];
            idx += j;
            if (idx >= n) idx -= n;
        }
        I[j - 1] = (re * re + im * im) / static_cast<double>(n);
    }
    return I;
}

/// Normalized Shannon entropy of the smoothed periodogram, in (0, 1].
inline double spectral_entropy(const std::vector<double>& x) {
    if (x.size() < 16) throw TooShort("spectral entropy needs at least 16 values");
    const auto I = periodogram(x);
    const std::size_t nf = I.size();
    // Two passes of the modified Daniell kernel with m = 1, applied circularly.
    static constexpr double kWeights[] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    std::vector<double> f(nf, 0.0);
    const long L = static_cast<long>(nf);
    for (long j = 0; j < L; ++j)
        for (long k = -2; k <= 2; ++k) f[j] += kWeights[k + 2] * I[((j + k) % L + L) % L];
    double total = 0.0;
    for (double v : f) total += v;
    if (!(total > 0.0)) throw DegenerateSeries("flat spectrum of a constant series");
    if (nf < 2) return 1.0;
    double h = 0.0;
    for (double v : f) {
        const double p = v / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::clamp(h / std::log(static_cast<double>(nf)), std::numeric_limits<double>::min(), 1.0);
}

/// 0.5 plus the Whittle estimate of d for ARFIMA(0,d,0), clamped to [0.5, 1].
inline double hurst(const std::vector<double>& x) {
    if (x.size() < 32) throw TooShort("hurst needs at least 32 values");
    const auto I = periodogram(x);
    const std::size_t nf = I.size();
    std::vector<double> lg(nf);
    for (std::size_t j = 0; j < nf; ++j) {
        const double lam = 2.0 * std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(x.size());
        lg[j] = std::log(std::abs(2.0 * std::sin(lam / 2.0)));
    }
    double total = 0.0;
    for (double v : I) total += v;
    if (!(total > 0.0)) throw DegenerateSeries("constant series has no spectrum");
    // g(lambda; d) = |2 sin(lambda/2)|^(-2d); profile out the innovation variance.
    auto objective = [&](double d) {
        double s = 0.0, sl = 0.0;
        for (std::size_t j = 0; j < nf; ++j) {
            const double lgj = -2.0 * d * lg[j];
            s += I[j] * std::exp(-lgj);
            sl += lgj;
        }
        return std::log(s / static_cast<double>(nf)) + sl / static_cast<double>(nf);
    };
    constexpr double kMax = 0.5;
    double best_d = 0.0, best_f = objective(0.0);
    for (int i = 1; i <= 50; ++i) {
        const double d = kMax * i / 50.0;
        const double v = objective(d);
        if (v < best_f) {
            best_f = v;
            best_d = d;
        }
    }
    double lo = std::max(0.0, best_d - kMax / 50.0), hi = std::min(kMax, best_d + kMax / 50.0);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    double fa = objective(a), fb = objective(b);
    while (hi - lo > 1e-10) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = objective(b);
        }
    }
    double d = 0.5 * (lo + hi);
    if (objective(d) > best_f) d = best_d;
    return std::clamp(0.5 + d, 0.5, 1.0);
}

// ---------------------------------------------------------------------------
// Nonlinearity
// ---------------------------------------------------------------------------

/// log(SSE_linear / SSE_nonlinear) from a lag-1 Terasvirta neural-network
/// test regression, i.e. the chi-square statistic divided by the sample size.
inline double nonlinearity(const std::vector<double>& series) {
    if (series.size() < 20) throw TooShort("nonlinearity needs at least 20 values");
    const auto x = standardize(series);
    const std::size_t T = x.size() - 1;
    Eigen::MatrixXd X1(T, 2), X0(T, 4);
    Eigen::VectorXd y(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double l = x[t];
        X1(t, 0) = 1.0;
        X1(t, 1) = l;
        X0(t, 0) = 1.0;
        X0(t, 1) = l;
        X0(t, 2) = l * l;
        X0(t, 3) = l * l * l;
        y(t) = x[t + 1];
    }
    const auto lin = stats::ols(X1, y);
    const auto aux = stats::ols(X0, lin.resid);
    if (!(aux.rss > 0.0)) throw SingularDesign("auxiliary regression fits exactly");
    return std::max(0.0, std::log(lin.rss / aux.rss));
}

// ---------------------------------------------------------------------------
// Window features
// ---------------------------------------------------------------------------

inline int window_width(int period) { return period > 1 ? period : 10; }

struct TiledFeatures {
    double stability, lumpiness;
};

inline TiledFeatures tiled_window_features(const std::vector<double>& series, int period) {
    const auto w = static_cast<std::size_t>(window_width(period));
    if (series.size() < 2 * w) throw TooShort("tiled features need two full tiles");
    const auto x = standardize(series);
    const std::size_t tiles = x.size() / w;
    std::vector<double> means(tiles), vars(tiles);
    for (std::size_t k = 0; k < tiles; ++k) {
        std::vector<double> tile(x.begin() + static_cast<long>(k * w), x.begin() + static_cast<long>((k + 1) * w));
        means[k] = stats::mean(tile);
        vars[k] = stats::variance(tile);
    }
    return {stats::variance(means), stats::variance(vars)};
}

struct ShiftFeatures {
    double max_level_shift, time_level_shift, max_var_shift, time_var_shift, max_kl_shift, time_kl_shift;
};

inline ShiftFeatures sliding_shift_features(const std::vector<double>& series, int period) {
    const auto w = static_cast<std::size_t>(window_width(period));
    if (series.size() < 2 * w) throw TooShort("shift features need two full windows");
    const auto x = standardize(series);
    const std::size_t nw = x.size() - w + 1;
    std::vector<double> m(nw), v(nw);
    for (std::size_t i = 0; i < nw; ++i) {
        double s = 0.0;
        for (std::size_t j = i; j < i + w; ++j) s += x[j];
        const double mu = s / static_cast<double>(w);
        double ss = 0.0;
        for (std::size_t j = i; j < i + w; ++j) ss += (x[j] - mu) * (x[j] - mu);
        m[i] = mu;
        v[i] = ss / static_cast<double>(w - 1);
    }
    constexpr double kVarFloor = 1e-10;
    ShiftFeatures f{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    bool first = true;
    for (std::size_t i = 0; i + w < nw; ++i) {
        const double level = std::abs(m[i + w] - m[i]);
        const double var = std::abs(v[i + w] - v[i]);
        const double v1 = std::max(v[i], kVarFloor), v2 = std::max(v[i + w], kVarFloor);
        const double dm = m[i] - m[i + w];
        const double kl = std::max(0.0, 0.5 * (std::log(v2 / v1) + (v1 + dm * dm) / v2 - 1.0));
        const double t = static_cast<double>(i + w);
        if (first || level > f.max_level_shift) f.max_level_shift = level, f.time_level_shift = t;
        if (first || var > f.max_var_shift) f.max_var_shift = var, f.time_var_shift = t;
        if (first || kl > f.max_kl_shift) f.max_kl_shift = kl, f.time_kl_shift = t;
        first = false;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Decomposition features
// ---------------------------------------------------------------------------

struct StlFeatures {
    double trend;
    std::vector<double> seasonal_strength;  ///< one per seasonal period; {0} for non-seasonal input
    double spike, linearity, curvature, e_acf1, e_acf10;
};

inline double strength(const std::vector<double>& comp, const std::vector<double>& e) {
    std::vector<double> ce(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) ce[i] = comp[i] + e[i];
    const double denom = stats::variance(ce);
    if (!(denom > 0.0)) return 0.0;
    return std::clamp(1.0 - stats::variance(e) / denom, 0.0, 1.0);
}

/// Variance of the leave-one-out sample variances.
inline double leave_one_out_variance_spread(const std::vector<double>& e) {
    const std::size_t n = e.size();
    if (n < 3) return 0.0;
    const double m = stats::mean(e);
    double s2 = 0.0;
    for (double v : e) s2 += (v - m) * (v - m);
    const double nd = static_cast<double>(n);
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) loo[i] = (s2 - (e[i] - m) * (e[i] - m) * nd / (nd - 1.0)) / (nd - 2.0);
    return stats::variance(loo);
}

/// Coefficients of y on the orthonormal linear and quadratic polynomials in time.
inline std::pair<double, double> orthogonal_quadratic_coefs(const std::vector<double>& y) {
    const std::size_t n = y.size();
    Eigen::MatrixXd B(n, 3);
    for (std::size_t t = 0; t < n; ++t) {
        const double u = n > 1 ? static_cast<double>(t) / static_cast<double>(n - 1) : 0.0;
        B(t, 0) = 1.0;
        B(t, 1) = u;
        B(t, 2) = u * u;
    }
    // Modified Gram-Schmidt keeps each column orthogonal to the constant.
    for (int k = 0; k < 3; ++k) {
        for (int j = 0; j < k; ++j) B.col(k) -= B.col(j).dot(B.col(k)) * B.col(j);
        const double nrm = B.col(k).norm();
        if (!(nrm > 0.0)) throw SingularDesign("polynomial basis is degenerate");
        B.col(k) /= nrm;
    }
    Eigen::Map<const Eigen::VectorXd> v(y.data(), static_cast<long>(n));
    return {B.col(1).dot(v), B.col(2).dot(v)};
}

inline StlFeatures stl_feature_set(const STLDecomposition& d, const std::vector<int>& periods) {
    StlFeatures f{};
    const auto& e = d.remainder;
    f.trend = strength(d.trend, e);
    std::vector<int> ps = periods;
    std::sort(ps.begin(), ps.end());
    for (int p : ps) {
        auto it = std::find(d.periods.begin(), d.periods.end(), p);
        f.seasonal_strength.push_back(it == d.periods.end() ? 0.0 : strength(d.seasonal[it - d.periods.begin()], e));
    }
    f.spike = leave_one_out_variance_spread(e);
    std::tie(f.linearity, f.curvature) = orthogonal_quadratic_coefs(d.trend);
    try {
        const auto a = stats::acf(e, 10);
        f.e_acf1 = a[1];
        f.e_acf10 = stats::sum_sq(a, 1, 10);
    } catch (const DegenerateSeries&) {
        f.e_acf1 = 0.0;
        f.e_acf10 = 0.0;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Feature vector
// ---------------------------------------------------------------------------

struct FeatureInfo {
    std::string name;
    double lo, hi;
    bool lo_open, hi_open;
    bool seasonal_only;
    bool integer;
};

/// Canonical per-feature ranges; "periods" and "seasonal.strength" repeat per period.
inline const std::vector<FeatureInfo>& feature_catalog() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    static const std::vector<FeatureInfo> cat = {
        {"length", 1, inf, false, true, false, true},
        {"nPeriods", 1, inf, false, true, false, true},
        {"periods", 1, inf, false, true, false, true},
        {"ndiffs", 0, 2, false, false, false, true},
        {"nsdiffs", 0, 1, false, false, true, true},
        {"x.acf1", -1, 1, true, true, false, false},
        {"x.acf10", 0, inf, false, true, false, false},
        {"diff1.acf1", -1, 1, true, true, false, false},
        {"diff1.acf10", 0, inf, false, true, false, false},
        {"diff2.acf1", -1, 1, true, true, false, false},
        {"diff2.acf10", 0, inf, false, true, false, false},
        {"seas.acf1", -1, 1, true, true, true, false},
        {"x.pacf5", 0, inf, false, true, false, false},
        {"diff1.pacf5", 0, inf, false, true, false, false},
        {"diff2.pacf5", 0, inf, false, true, false, false},
        {"seas.pacf", -1, 1, true, true, true, false},
        {"entropy", 0, 1, true, false, false, false},
        {"nonlinearity", 0, inf, false, true, false, false},
        {"hurst", 0.5, 1, false, false, false, false},
        {"stability", 0, inf, false, true, false, false},
        {"lumpiness", 0, inf, false, true, false, false},
        {"unitroot.kpss", 0, inf, false, true, false, false},
        {"unitroot.pp", -inf, inf, true, true, false, false},
        {"max.level.shift", 0, inf, false, true, false, false},
        {"time.level.shift", 1, inf, false, true, false, true},
        {"max.var.shift", 0, inf, false, true, false, false},
        {"time.var.shift", 1, inf, false, true, false, true},
        {"max.kl.shift", 0, inf, false, true, false, false},
        {"time.kl.shift", 1, inf, false, true, false, true},
        {"trend", 0, 1, false, false, false, false},
        {"seasonal.strength", 0, 1, false, false, true, false},
        {"spike", 0, inf, false, true, false, false},
        {"linearity", -inf, inf, true, true, false, false},
        {"curvature", -inf, inf, true, true, false, false},
        {"e.acf1", -1, 1, true, true, false, false},
        {"e.acf10", 0, inf, false, true, false, false},
        {"arch.acf", 0, inf, false, true, false, false},
        {"garch.acf", 0, inf, false, true, false, false},
        {"arch.r2", 0, 1, false, false, false, false},
        {"garch.r2", 0, 1, false, false, false, false},
    };
    return cat;
}

/// Catalog entry for a (possibly period-suffixed) feature name, or nullptr.
inline const FeatureInfo* find_feature_info(const std::string& name) {
    std::string base = name;
    const auto dot = name.rfind('.');
    if (dot != std::string::npos && dot + 1 < name.size() &&
        std::all_of(name.begin() + static_cast<long>(dot) + 1, name.end(), ::isdigit) &&
        (name.compare(0, dot, "periods") == 0 || name.compare(0, dot, "seasonal.strength") == 0))
        base = name.substr(0, dot);
    for (const auto& f : feature_catalog())
        if (f.name == base) return &f;
    return nullptr;
}

inline bool in_range(const FeatureInfo& info, double v) {
    if (!std::isfinite(v)) return false;
    if (info.lo_open ? !(v > info.lo) : !(v >= info.lo)) return false;
    if (info.hi_open ? !(v < info.hi) : !(v <= info.hi)) return false;
    return true;
}

/// Canonical column names for a series with the given number of periods.
inline std::vector<std::string> feature_names(std::size_t n_periods = 1) {
    std::vector<std::string> out;
    for (const auto& f : feature_catalog()) {
        out.push_back(f.name);
        if (f.name == "periods" || f.name == "seasonal.strength")
            for (std::size_t k = 2; k <= n_periods; ++k) out.push_back(f.name + "." + std::to_string(k));
    }
    return out;
}

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<std::optional<double>> values;
    std::vector<std::string> flags;  ///< diagnostics such as "garch_fit_failed"

    std::size_t size() const { return names.size(); }

    std::optional<double> get(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        throw InvalidArgument("unknown feature name: " + name);
    }

    bool has(const std::string& name) const {
        return std::find(names.begin(), names.end(), name) != names.end();
    }
};

namespace features_detail {

enum class Group { Diffs, NsDiffs, Acf, Pacf, Entropy, Nonlinearity, Hurst, Tiled, UnitRoot, Shift, Stl, Hetero };

inline Group group_of(const std::string& base) {
    static const std::map<std::string, Group> g = {
        {"ndiffs", Group::Diffs},          {"nsdiffs", Group::NsDiffs},
        {"x.acf1", Group::Acf},            {"x.acf10", Group::Acf},
        {"diff1.acf1", Group::Acf},        {"diff1.acf10", Group::Acf},
        {"diff2.acf1", Group::Acf},        {"diff2.acf10", Group::Acf},
        {"seas.acf1", Group::Acf},         {"x.pacf5", Group::Pacf},
        {"diff1.pacf5", Group::Pacf},      {"diff2.pacf5", Group::Pacf},
        {"seas.pacf", Group::Pacf},        {"entropy", Group::Entropy},
        {"nonlinearity", Group::Nonlinearity}, {"hurst", Group::Hurst},
        {"stability", Group::Tiled},       {"lumpiness", Group::Tiled},
        {"unitroot.kpss", Group::UnitRoot}, {"unitroot.pp", Group::UnitRoot},
        {"max.level.shift", Group::Shift}, {"time.level.shift", Group::Shift},
        {"max.var.shift", Group::Shift},   {"time.var.shift", Group::Shift},
        {"max.kl.shift", Group::Shift},    {"time.kl.shift", Group::Shift},
        {"trend", Group::Stl},             {"seasonal.strength", Group::Stl},
        {"spike", Group::Stl},             {"linearity", Group::Stl},
        {"curvature", Group::Stl},         {"e.acf1", Group::Stl},
        {"e.acf10", Group::Stl},           {"arch.acf", Group::Hetero},
        {"garch.acf", Group::Hetero},      {"arch.r2", Group::Hetero},
        {"garch.r2", Group::Hetero},
    };
    auto it = g.find(base);
    if (it == g.end()) throw InvalidArgument("feature has no computation group: " + base);
    return it->second;
}

}  // namespace features_detail

/// Full feature vector in canonical order. Values that cannot be computed for
/// this series are left absent. When `only` is given, just the listed
/// features are computed (the others stay absent).
inline FeatureVector compute_feature_vector(const TimeSeries& ts,
                                            const std::optional<std::vector<std::string>>& only = std::nullopt) {
    using features_detail::Group;
    ts.validate();
    std::vector<int> periods = ts.periods;
    std::sort(periods.begin(), periods.end());
    const std::size_t P = periods.size();
    const int maxp = periods.back();

    FeatureVector fv;
    fv.names = feature_names(P);
    fv.values.assign(fv.names.size(), std::nullopt);
    auto idx = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(fv.names.begin(), fv.names.end(), name) - fv.names.begin());
    };
    auto set = [&](const std::string& name, double v) { fv.values[idx(name)] = v; };

    set("length", static_cast<double>(ts.size()));
    set("nPeriods", static_cast<double>(P));
    for (std::size_t k = 0; k < P; ++k)
        set(k == 0 ? "periods" : "periods." + std::to_string(k + 1), static_cast<double>(periods[k]));

    std::set<Group> wanted;
    if (only) {
        for (const auto& n : *only) {
            const FeatureInfo* info = find_feature_info(n);
            if (!info) throw InvalidArgument("unknown feature name: " + n);
            if (info->name == "length" || info->name == "nPeriods" || info->name == "periods") continue;
            wanted.insert(features_detail::group_of(info->name));
        }
    } else {
        for (int g = 0; g <= static_cast<int>(Group::Hetero); ++g) wanted.insert(static_cast<Group>(g));
    }

    std::vector<double> z;
    try {
        z = standardize(ts.values);
    } catch (const Error&) {
        fv.flags.push_back("degenerate_series");
        return fv;
    }

    auto guarded = [&](Group g, const std::function<void()>& body) {
        if (!wanted.count(g)) return;
        try {
            body();
        } catch (const Error&) {
            // leave the group's entries absent
        }
    };

    guarded(Group::Diffs, [&] { set("ndiffs", ndiffs(z)); });
    guarded(Group::NsDiffs, [&] { set("nsdiffs", nsdiffs(z, maxp)); });
    guarded(Group::Acf, [&] {
        const auto a = acf_feature_set(z, maxp);
        set("x.acf1", a.x_acf1);
        set("x.acf10", a.x_acf10);
        set("diff1.acf1", a.diff1_acf1);
        set("diff1.acf10", a.diff1_acf10);
        set("diff2.acf1", a.diff2_acf1);
        set("diff2.acf10", a.diff2_acf10);
        set("seas.acf1", a.seas_acf1);
    });
    guarded(Group::Pacf, [&] {
        const auto p = pacf_feature_set(z, maxp);
        set("x.pacf5", p.x_pacf5);
        set("diff1.pacf5", p.diff1_pacf5);
        set("diff2.pacf5", p.diff2_pacf5);
        set("seas.pacf", p.seas_pacf);
    });
    guarded(Group::Entropy, [&] { set("entropy", spectral_entropy(z)); });
    guarded(Group::Nonlinearity, [&] { set("nonlinearity", nonlinearity(z)); });
    guarded(Group::Hurst, [&] { set("hurst", hurst(z)); });
    guarded(Group::Tiled, [&] {
        const auto t = tiled_window_features(z, maxp);
        set("stability", t.stability);
        set("lumpiness", t.lumpiness);
    });
    guarded(Group::UnitRoot, [&] {
        if (z.size() < 12) throw TooShort("unit root statistics need at least 12 values");
        set("unitroot.kpss", kpss_stat(z, true, 1));
        set("unitroot.pp", pp_zalpha(z, 1));
    });
    guarded(Group::Shift, [&] {
        const auto s = sliding_shift_features(z, maxp);
        set("max.level.shift", s.max_level_shift);
        set("time.level.shift", s.time_level_shift);
        set("max.var.shift", s.max_var_shift);
        set("time.var.shift", s.time_var_shift);
        set("max.kl.shift", s.max_kl_shift);
        set("time.kl.shift", s.time_kl_shift);
    });
    guarded(Group::Stl, [&] {
        const auto d = stl_decompose_multi(z, periods);
        const auto s = stl_feature_set(d, periods);
        set("trend", s.trend);
        for (std::size_t k = 0; k < P; ++k)
            set(k == 0 ? "seasonal.strength" : "seasonal.strength." + std::to_string(k + 1), s.seasonal_strength[k]);
        set("spike", s.spike);
        set("linearity", s.linearity);
        set("curvature", s.curvature);
        set("e.acf1", s.e_acf1);
        set("e.acf10", s.e_acf10);
    });
    guarded(Group::Hetero, [&] {
        const auto h = heterogeneity_features(z);
        if (h.garch_failed) fv.flags.push_back("garch_fit_failed");
        set("arch.acf", h.arch_acf);
        set("garch.acf", h.garch_acf);
        set("arch.r2", h.arch_r2);
        set("garch.r2", h.garch_r2);
    });
    return fv;
}

inline FeatureVector compute_feature_vector(const std::vector<double>& values, std::vector<int> periods = {1}) {
    TimeSeries ts;
    ts.values = values;
    ts.periods = std::move(periods);
    return compute_feature_vector(ts);
}

}  // namespace gratis
