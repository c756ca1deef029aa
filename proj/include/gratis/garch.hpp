#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gratis/error.hpp"
#include "gratis/optim.hpp"
#include "gratis/stats.hpp"

namespace gratis {

struct GarchFit {
    double omega = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double nll = 0.0;
    std::vector<double> h;  ///< conditional variances
};

namespace garch_detail {

inline constexpr double kPersistCap = 0.999;

struct Params {
    double omega, alpha, beta;
};

inline Params decode(const std::vector<double>& v) {
    const double eb = std::exp(std::clamp(v[1], -40.0, 40.0));
    const double ec = std::exp(std::clamp(v[2], -40.0, 40.0));
    const double den = 1.0 + eb + ec;
    return {std::exp(std::clamp(v[0], -700.0, 700.0)), kPersistCap * eb / den, kPersistCap * ec / den};
}

inline std::vector<double> encode(double omega, double alpha, double beta) {
    const double den = 1.0 / (1.0 - (alpha + beta) / kPersistCap);
    return {std::log(omega), std::log(alpha * den / kPersistCap), std::log(beta * den / kPersistCap)};
}

inline double nll(const std::vector<double>& x, double h1, const Params& p, std::vector<double>* h_out) {
    double h = h1, s = 0.0;
    if (h_out) h_out->resize(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (t > 0) h = p.omega + p.alpha * x[t - 1] * x[t - 1] + p.beta * h;
        if (!(h > 0.0) || !std::isfinite(h)) return std::numeric_limits<double>::infinity();
        if (h_out) (*h_out)[t] = h;
        s += std::log(h) + x[t] * x[t] / h;
    }
    return 0.5 * s;
}

}  // namespace garch_detail

/// Gaussian quasi-likelihood GARCH(1,1) for a zero-mean series, with the
/// first conditional variance fixed at the sample mean square. Constraints
/// omega > 0, alpha, beta >= 0, alpha + beta < 0.999 hold by reparametrization.
inline GarchFit fit_garch11(const std::vector<double>& x) {
    using namespace garch_detail;
    if (x.size() < 10) throw TooShort("GARCH fit needs at least 10 values");
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    if (!(ms > 0.0) || !std::isfinite(ms)) throw GarchFitFailed("series has zero mean square");
    // Work on a unit-scale copy so the optimizer sees the same problem for any scale.
    const double scale = std::sqrt(ms);
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = x[i] / scale;

    auto obj = [&](const std::vector<double>& v) { return nll(u, 1.0, decode(v), nullptr); };
    static constexpr std::array<std::array<double, 2>, 3> kStarts{{{0.05, 0.90}, {0.10, 0.80}, {0.20, 0.50}}};
    optim::NelderMeadResult best;
    best.f = std::numeric_limits<double>::infinity();
    for (const auto& st : kStarts) {
        auto v0 = encode(1.0 - st[0] - st[1], st[0], st[1]);
        auto r = optim::nelder_mead(obj, v0);
        r = optim::nelder_mead(obj, r.x, {2000, 1e-12, 1e-9, 0.1});  // restart to escape a collapsed simplex
        if (r.f < best.f) best = r;
    }
    if (!std::isfinite(best.f)) throw GarchFitFailed("GARCH likelihood is not finite at any start");
    const Params p = decode(best.x);
    GarchFit out;
    out.omega = p.omega * ms;
    out.alpha = p.alpha;
    out.beta = p.beta;
    std::vector<double> h;
    nll(u, 1.0, p, &h);
    for (auto& v : h) v *= ms;
    out.h = std::move(h);
    out.nll = best.f;
    return out;
}

struct HeterogeneityFeatures {
    double arch_acf = 0.0;
    double garch_acf = 0.0;
    double arch_r2 = 0.0;
    double garch_r2 = 0.0;
    bool garch_failed = false;
};

namespace garch_detail {

/// Residuals of a Yule-Walker AR fit with order chosen by AIC in [0, max_order].
inline std::vector<double> ar_prewhiten(const std::vector<double>& r, int max_order) {
    const std::size_t n = r.size();
    const auto rho = stats::acf(r, static_cast<std::size_t>(max_order));
    double c0 = 0.0;
    for (double v : r) c0 += v * v;
    c0 /= static_cast<double>(n);
    std::vector<double> phi, prev;
    double v = c0;
    double best_aic = static_cast<double>(n) * std::log(v);
    std::vector<double> best_phi;
    for (int k = 1; k <= max_order; ++k) {
        double num = rho[k];
        for (int j = 1; j < k; ++j) num -= prev[j - 1] * rho[k - j];
        const double a = num / (v / c0);
        phi.assign(k, 0.0);
        for (int j = 1; j < k; ++j) phi[j - 1] = prev[j - 1] - a * prev[k - j - 1];
        phi[k - 1] = a;
        v *= (1.0 - a * a);
        prev = phi;
        if (!(v > 0.0)) break;
        const double aic = static_cast<double>(n) * std::log(v) + 2.0 * k;
        if (aic < best_aic) {
            best_aic = aic;
            best_phi = phi;
        }
    }
    const std::size_t p = best_phi.size();
    std::vector<double> e(n - p);
    for (std::size_t t = p; t < n; ++t) {
        double s = r[t];
        for (std::size_t i = 0; i < p; ++i) s -= best_phi[i] * r[t - 1 - i];
        e[t - p] = s;
    }
    return e;
}

inline std::vector<double> demeaned_squares(const std::vector<double>& x) {
    const double m = stats::mean(x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) * (x[i] - m);
    return out;
}

inline double lagged_r2(const std::vector<double>& y, int lags) {
    const std::size_t n = y.size();
    const std::size_t rows = n - static_cast<std::size_t>(lags);
    Eigen::MatrixXd X(rows, lags + 1);
    Eigen::VectorXd v(rows);
    for (std::size_t t = 0; t < rows; ++t) {
        X(t, 0) = 1.0;
        for (int j = 1; j <= lags; ++j) X(t, j) = y[t + lags - j];
        v(t) = y[t + lags];
    }
    try {
        return stats::r_squared(v, stats::ols(X, v).rss);
    } catch (const SingularDesign&) {
        return 0.0;
    }
}

inline double acf_sumsq(const std::vector<double>& y, int lags) {
    try {
        return stats::sum_sq(stats::acf(y, static_cast<std::size_t>(lags)), 1, static_cast<std::size_t>(lags));
    } catch (const DegenerateSeries&) {
        return 0.0;
    }
}

}  // namespace garch_detail

/// arch.acf, garch.acf, arch.r2, garch.r2 from the pre-whitened series and
/// its GARCH(1,1) standardized residuals.
inline HeterogeneityFeatures heterogeneity_features(const std::vector<double>& series) {
    using namespace garch_detail;
    const std::size_t n = series.size();
    if (n < 50) throw TooShort("heterogeneity features need at least 50 values");
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (std::size_t t = 0; t < n; ++t) {
        X(t, 0) = 1.0;
        X(t, 1) = static_cast<double>(t + 1);
        y(t) = series[t];
    }
    const Eigen::VectorXd r = stats::ols(X, y).resid;
    std::vector<double> rv(r.data(), r.data() + n);
    const int max_order = std::min<int>(10, static_cast<int>(n / 10));
    const std::vector<double> x = ar_prewhiten(rv, max_order);

    constexpr int kLags = 12;
    HeterogeneityFeatures f;
    const auto x2 = demeaned_squares(x);
    f.arch_acf = acf_sumsq(x2, kLags);
    f.arch_r2 = lagged_r2(x2, kLags);
    try {
        const double m = stats::mean(x);
        std::vector<double> xc(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xc[i] = x[i] - m;
        const GarchFit g = fit_garch11(xc);
        std::vector<double> z(xc.size());
        for (std::size_t i = 0; i < xc.size(); ++i) z[i] = xc[i] / std::sqrt(g.h[i]);
        const auto z2 = demeaned_squares(z);
        f.garch_acf = acf_sumsq(z2, kLags);
        f.garch_r2 = lagged_r2(z2, kLags);
    } catch (const Error&) {
        f = HeterogeneityFeatures{};
        f.garch_failed = true;
    }
    return f;
}

}  // namespace gratis
