#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "gratis/error.hpp"

namespace gratis::stats {

inline double mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample variance (n - 1 denominator).
inline double variance(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline std::vector<double> diff(const std::vector<double>& x, std::size_t lag = 1, int times = 1) {
    std::vector<double> out = x;
    for (int r = 0; r < times; ++r) {
        if (out.size() <= lag) return {};
        std::vector<double> next(out.size() - lag);
        for (std::size_t i = lag; i < out.size(); ++i) next[i - lag] = out[i] - out[i - lag];
        out.swap(next);
    }
    return out;
}

/// Biased sample autocorrelations r_0..r_maxlag (r_0 = 1).
inline std::vector<double> acf(const std::vector<double>& x, std::size_t maxlag) {
    const std::size_t n = x.size();
    if (n < 2) throw TooShort("acf needs at least 2 values");
    const double m = mean(x);
    double c0 = 0.0;
    for (double v : x) c0 += (v - m) * (v - m);
    if (!(c0 > 0.0)) throw DegenerateSeries("acf of a constant series");
    std::vector<double> r(maxlag + 1, 0.0);
    r[0] = 1.0;
    for (std::size_t k = 1; k <= maxlag && k < n; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) s += (x[t] - m) * (x[t + k] - m);
        r[k] = s / c0;
    }
    return r;
}

/// Partial autocorrelations phi_11..phi_LL by Durbin-Levinson on the biased acf.
inline std::vector<double> pacf(const std::vector<double>& x, std::size_t maxlag) {
    const auto r = acf(x, maxlag);
    std::vector<double> out(maxlag, 0.0), phi(maxlag + 1, 0.0), prev(maxlag + 1, 0.0);
    double v = 1.0;
    for (std::size_t k = 1; k <= maxlag; ++k) {
        double num = r[k];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * r[k - j];
        const double a = v > 0.0 ? num / v : 0.0;
        phi[k] = a;
        for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - a * prev[k - j];
        v *= (1.0 - a * a);
        out[k - 1] = a;
        prev = phi;
    }
    return out;
}

inline double sum_sq(const std::vector<double>& r, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i <= to && i < r.size(); ++i) s += r[i] * r[i];
    return s;
}

/// Quantile with linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile(std::vector<double> x, double p) {
    if (x.empty()) throw EmptyDataset("quantile of empty sample");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(const std::vector<double>& x) { return quantile(x, 0.5); }

struct OlsResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd resid;
    double rss = 0.0;
};

/// Least squares through a column-pivoting QR; throws SingularDesign on rank loss.
inline OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw SingularDesign("design matrix is rank deficient");
    OlsResult r;
    r.beta = qr.solve(y);
    r.resid = y - X * r.beta;
    r.rss = r.resid.squaredNorm();
    return r;
}

inline double r_squared(const Eigen::VectorXd& y, double rss) {
    const double m = y.mean();
    const double tss = (y.array() - m).square().sum();
    if (!(tss > 0.0)) return 0.0;
    return std::clamp(1.0 - rss / tss, 0.0, 1.0);
}

}  // namespace gratis::stats
