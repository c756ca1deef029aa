#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gratis/error.hpp"
#include "gratis/stats.hpp"

namespace gratis {

/// KPSS statistic with a Bartlett long-run variance over `lags` lags.
/// `trend` selects the linear-trend null; otherwise level stationarity.
inline double kpss_stat(const std::vector<double>& x, bool trend, int lags) {
    const std::size_t n = x.size();
    if (n < 3) throw TooShort("KPSS needs at least 3 values");
    Eigen::MatrixXd X(n, trend ? 2 : 1);
    Eigen::VectorXd y(n);
    for (std::size_t t = 0; t < n; ++t) {
        X(t, 0) = 1.0;
        if (trend) X(t, 1) = static_cast<double>(t + 1);
        y(t) = x[t];
    }
    const Eigen::VectorXd e = stats::ols(X, y).resid;
    double s2 = e.squaredNorm();
    for (int i = 1; i <= lags && static_cast<std::size_t>(i) < n; ++i) {
        double c = 0.0;
        for (std::size_t t = static_cast<std::size_t>(i); t < n; ++t) c += e(t) * e(t - i);
        s2 += 2.0 * (1.0 - i / (lags + 1.0)) * c;
    }
    s2 /= static_cast<double>(n);
    if (!(s2 > 0.0)) throw DegenerateSeries("KPSS long-run variance is zero");
    double cum = 0.0, eta = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        cum += e(t);
        eta += cum * cum;
    }
    return eta / (static_cast<double>(n) * static_cast<double>(n) * s2);
}

/// Phillips-Perron Z-alpha with a constant, Bartlett long-run variance over `lags` lags.
inline double pp_zalpha(const std::vector<double>& x, int lags = 1) {
    const std::size_t N = x.size();
    if (N < 4) throw TooShort("PP test needs at least 4 values");
    const std::size_t T = N - 1;
    Eigen::MatrixXd X(T, 2);
    Eigen::VectorXd y(T);
    double lag_mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        X(t, 0) = x[t];
        X(t, 1) = 1.0;
        y(t) = x[t + 1];
        lag_mean += x[t];
    }
    lag_mean /= static_cast<double>(T);
    const auto fit = stats::ols(X, y);
    const double rho = fit.beta(0);
    const Eigen::VectorXd& u = fit.resid;
    const double Td = static_cast<double>(T);
    const double gamma0 = u.squaredNorm() / Td;
    double lam2 = gamma0;
    for (int j = 1; j <= lags && static_cast<std::size_t>(j) < T; ++j) {
        double c = 0.0;
        for (std::size_t t = static_cast<std::size_t>(j); t < T; ++t) c += u(t) * u(t - j);
        lam2 += 2.0 * (1.0 - j / (lags + 1.0)) * c / Td;
    }
    double sxx = 0.0;
    for (std::size_t t = 0; t < T; ++t) sxx += (x[t] - lag_mean) * (x[t] - lag_mean);
    return Td * (rho - 1.0) - 0.5 * (lam2 - gamma0) * Td * Td / sxx;
}

inline constexpr double kKpssLevelCrit5 = 0.463;
inline constexpr double kKpssTrendCrit5 = 0.146;

inline bool is_constant(const std::vector<double>& x) {
    for (double v : x)
        if (v != x.front()) return false;
    return true;
}

/// Smallest d in {0,1,2} whose d-th difference passes level KPSS at 5%.
inline int ndiffs(const std::vector<double>& x) {
    if (x.size() < 12) throw TooShort("ndiffs needs at least 12 values");
    std::vector<double> y = x;
    for (int d = 0; d <= 2; ++d) {
        if (d > 0) y = stats::diff(y);
        if (is_constant(y)) return d;
        const int lag = static_cast<int>(3.0 * std::sqrt(static_cast<double>(y.size())) / 13.0);
        if (kpss_stat(y, false, lag) < kKpssLevelCrit5) return d;
    }
    return 2;
}

struct OcsbResult {
    double stat;
    int lag;
};

/// OCSB regression
///   D1 Dm x_t = c + b1 Dm x_{t-1} + b2 D1 x_{t-m} + sum_i phi_i D1 Dm x_{t-i} + e_t
/// with p in {0..max_lag} chosen by AIC on a common sample; returns the t value of b2.
inline OcsbResult ocsb_stat(const std::vector<double>& x, int m, int max_lag = 3) {
    const auto n = static_cast<long>(x.size());
    const long t0 = m + 1 + max_lag;
    if (n - t0 < max_lag + 4) throw TooShort("OCSB regression has too few observations");
    const long rows = n - t0;
    auto dm = [&](long t) { return x[t] - x[t - m]; };
    auto ddm = [&](long t) { return dm(t) - dm(t - 1); };

    Eigen::VectorXd y(rows);
    for (long r = 0; r < rows; ++r) y(r) = ddm(t0 + r);

    bool have = false;
    double best_aic = 0.0;
    OcsbResult best{0.0, 0};
    for (int p = 0; p <= max_lag; ++p) {
        Eigen::MatrixXd X(rows, 3 + p);
        for (long r = 0; r < rows; ++r) {
            const long t = t0 + r;
            X(r, 0) = 1.0;
            X(r, 1) = dm(t - 1);
            X(r, 2) = x[t - m] - x[t - m - 1];
            for (int i = 1; i <= p; ++i) X(r, 2 + i) = ddm(t - i);
        }
        stats::OlsResult fit;
        try {
            fit = stats::ols(X, y);
        } catch (const SingularDesign&) {
            continue;
        }
        const double k = static_cast<double>(X.cols());
        const double nobs = static_cast<double>(rows);
        if (!(fit.rss > 0.0)) continue;
        const double aic = nobs * std::log(fit.rss / nobs) + 2.0 * k;
        if (!have || aic < best_aic - 1e-12) {
            const double sigma2 = fit.rss / (nobs - k);
            const Eigen::MatrixXd XtX = X.transpose() * X;
            const Eigen::MatrixXd inv = XtX.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
            best = {fit.beta(2) / std::sqrt(sigma2 * inv(2, 2)), p};
            best_aic = aic;
            have = true;
        }
    }
    if (!have) throw SingularDesign("every OCSB regression was singular");
    return best;
}

/// 5% critical value of the OCSB t statistic as a smooth function of the period.
inline double ocsb_critical_value(int m) {
    const double lm = std::log(static_cast<double>(m)) - 0.7656451;
    return -0.2937411 * std::exp(-0.2850853 * lm - 0.05983644 * lm * lm) - 1.652202;
}

/// 0 or 1 seasonal differences from the OCSB test at the given period.
inline int nsdiffs(const std::vector<double>& x, int period) {
    if (period <= 1) return 0;
    if (x.size() < static_cast<std::size_t>(2 * period + 8)) return 0;
    if (is_constant(x)) return 0;
    try {
        return ocsb_stat(x, period).stat > ocsb_critical_value(period) ? 1 : 0;
    } catch (const Error&) {
        return 0;
    }
}

}  // namespace gratis
