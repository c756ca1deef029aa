#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gratis/error.hpp"

namespace gratis {

struct StlParams {
    int period = 2;
    int s_window = 21;
    int s_degree = 0;
    int t_window = 0;  // 0 => default from period and s_window
    int t_degree = 1;
    int l_window = 0;  // 0 => next odd of period
    int l_degree = 1;
    int s_jump = 0;  // 0 => ceil(window / 10)
    int t_jump = 0;
    int l_jump = 0;
    int inner = 2;
    int outer = 0;
};

struct StlResult {
    std::vector<double> seasonal;
    std::vector<double> trend;
    std::vector<double> remainder;
};

namespace stl_detail {

inline int next_odd(double v) {
    int i = static_cast<int>(std::ceil(v));
    return i % 2 == 0 ? i + 1 : i;
}

// Arrays below follow the 1-based indexing of the classic loess-based
// decomposition routines; element i lives at p[i - 1].

/// Local (degree 0 or 1) tricube fit at abscissa xs from y[nleft..nright].
inline bool est(const double* y, int n, int len, int ideg, double xs, double& ys, int nleft, int nright, double* w,
                bool userw, const double* rw) {
    const double range = static_cast<double>(n) - 1.0;
    double h = std::max(xs - nleft, nright - xs);
    if (len > n) h += static_cast<double>((len - n) / 2);
    const double h9 = 0.999 * h, h1 = 0.001 * h;
    double a = 0.0;
    for (int j = nleft; j <= nright; ++j) {
        w[j - 1] = 0.0;
        const double r = std::abs(j - xs);
        if (r <= h9) {
            if (r <= h1) {
                w[j - 1] = 1.0;
            } else {
                const double q = r / h;
                const double t = 1.0 - q * q * q;
                w[j - 1] = t * t * t;
            }
            if (userw) w[j - 1] *= rw[j - 1];
            a += w[j - 1];
        }
    }
    if (a <= 0.0) return false;
    for (int j = nleft; j <= nright; ++j) w[j - 1] /= a;
    if (h > 0.0 && ideg > 0) {
        a = 0.0;
        for (int j = nleft; j <= nright; ++j) a += w[j - 1] * j;
        double b = xs - a;
        double c = 0.0;
        for (int j = nleft; j <= nright; ++j) c += w[j - 1] * (j - a) * (j - a);
        if (std::sqrt(c) > 0.001 * range) {
            b /= c;
            for (int j = nleft; j <= nright; ++j) w[j - 1] *= b * (j - a) + 1.0;
        }
    }
    ys = 0.0;
    for (int j = nleft; j <= nright; ++j) ys += w[j - 1] * y[j - 1];
    return true;
}

/// Loess smoothing of y (length n) with evaluation every njump points and
/// linear interpolation in between.
inline void ess(const double* y, int n, int len, int ideg, int njump, bool userw, const double* rw, double* ys,
                double* res) {
    if (n < 2) {
        ys[0] = y[0];
        return;
    }
    const int newnj = std::min(njump, n - 1);
    int nleft = 1, nright = n;
    if (len >= n) {
        nleft = 1;
        nright = n;
        for (int i = 1; i <= n; i += newnj)
            if (!est(y, n, len, ideg, i, ys[i - 1], nleft, nright, res, userw, rw)) ys[i - 1] = y[i - 1];
    } else if (newnj == 1) {
        const int nsh = (len + 1) / 2;
        nleft = 1;
        nright = len;
        for (int i = 1; i <= n; ++i) {
            if (i > nsh && nright != n) {
                ++nleft;
                ++nright;
            }
            if (!est(y, n, len, ideg, i, ys[i - 1], nleft, nright, res, userw, rw)) ys[i - 1] = y[i - 1];
        }
    } else {
        const int nsh = (len + 1) / 2;
        for (int i = 1; i <= n; i += newnj) {
            if (i < nsh) {
                nleft = 1;
                nright = len;
            } else if (i >= n - nsh + 1) {
                nleft = n - len + 1;
                nright = n;
            } else {
                nleft = i - nsh + 1;
                nright = len + i - nsh;
            }
            if (!est(y, n, len, ideg, i, ys[i - 1], nleft, nright, res, userw, rw)) ys[i - 1] = y[i - 1];
        }
    }
    if (newnj != 1) {
        for (int i = 1; i <= n - newnj; i += newnj) {
            const double delta = (ys[i + newnj - 1] - ys[i - 1]) / newnj;
            for (int j = i + 1; j <= i + newnj - 1; ++j) ys[j - 1] = ys[i - 1] + delta * (j - i);
        }
        const int k = ((n - 1) / newnj) * newnj + 1;
        if (k != n) {
            if (!est(y, n, len, ideg, n, ys[n - 1], nleft, nright, res, userw, rw)) ys[n - 1] = y[n - 1];
            if (k != n - 1) {
                const double delta = (ys[n - 1] - ys[k - 1]) / (n - k);
                for (int j = k + 1; j <= n - 1; ++j) ys[j - 1] = ys[k - 1] + delta * (j - k);
            }
        }
    }
}

inline void ma(const double* x, int n, int len, double* ave) {
    const int newn = n - len + 1;
    const double flen = len;
    double v = 0.0;
    for (int i = 1; i <= len; ++i) v += x[i - 1];
    ave[0] = v / flen;
    if (newn > 1) {
        int k = len, m = 0;
        for (int j = 2; j <= newn; ++j) {
            ++k;
            ++m;
            v = v - x[m - 1] + x[k - 1];
            ave[j - 1] = v / flen;
        }
    }
}

inline void fts(const double* x, int n, int np, double* trend, double* work) {
    ma(x, n, np, trend);
    ma(trend, n - np + 1, np, work);
    ma(work, n - 2 * np + 2, 3, trend);
}

/// Smooths each cycle-subseries and extends it by one value at both ends.
inline void ss(const double* y, int n, int np, int ns, int isdeg, int nsjump, bool userw, const double* rw,
               double* season, double* work1, double* work2, double* work3, double* work4) {
    for (int j = 1; j <= np; ++j) {
        const int k = (n - j) / np + 1;
        for (int i = 1; i <= k; ++i) work1[i - 1] = y[(i - 1) * np + j - 1];
        if (userw)
            for (int i = 1; i <= k; ++i) work3[i - 1] = rw[(i - 1) * np + j - 1];
        ess(work1, k, ns, isdeg, nsjump, userw, work3, work2 + 1, work4);
        double xs = 0.0;
        const int nright = std::min(ns, k);
        if (!est(work1, k, ns, isdeg, xs, work2[0], 1, nright, work4, userw, work3)) work2[0] = work2[1];
        xs = k + 1;
        const int nleft = std::max(1, k - ns + 1);
        if (!est(work1, k, ns, isdeg, xs, work2[k + 1], nleft, k, work4, userw, work3)) work2[k + 1] = work2[k];
        for (int m = 1; m <= k + 2; ++m) season[(m - 1) * np + j - 1] = work2[m - 1];
    }
}

}  // namespace stl_detail

/// Seasonal-trend decomposition by loess with the inner/outer loop structure
/// of the reference Fortran routines (robustness weights unused when outer = 0).
inline StlResult stl(const std::vector<double>& y, StlParams p) {
    using namespace stl_detail;
    const int n = static_cast<int>(y.size());
    const int np = std::max(2, p.period);
    if (n < 2 * np + 1) throw TooShort("STL needs more than two full periods");
    int ns = std::max(3, p.s_window);
    if (ns % 2 == 0) ++ns;
    int nt = p.t_window > 0 ? p.t_window : next_odd(1.5 * np / (1.0 - 1.5 / ns));
    nt = std::max(3, nt);
    if (nt % 2 == 0) ++nt;
    int nl = p.l_window > 0 ? p.l_window : next_odd(np);
    nl = std::max(3, nl);
    if (nl % 2 == 0) ++nl;
    const int nsjump = p.s_jump > 0 ? p.s_jump : static_cast<int>(std::ceil(ns / 10.0));
    const int ntjump = p.t_jump > 0 ? p.t_jump : static_cast<int>(std::ceil(nt / 10.0));
    const int nljump = p.l_jump > 0 ? p.l_jump : static_cast<int>(std::ceil(nl / 10.0));

    std::vector<double> season(n, 0.0), trend(n, 0.0), rw(n, 1.0);
    const int wn = n + 2 * np;
    std::vector<double> w1(wn), w2(wn), w3(wn), w4(wn), w5(wn);
    bool userw = false;
    for (int outer = 0;; ++outer) {
        for (int it = 0; it < p.inner; ++it) {
            for (int i = 0; i < n; ++i) w1[i] = y[i] - trend[i];
            ss(w1.data(), n, np, ns, p.s_degree, nsjump, userw, rw.data(), w2.data(), w3.data(), w4.data(),
               w5.data(), season.data());
            fts(w2.data(), wn, np, w3.data(), w1.data());
            ess(w3.data(), n, nl, p.l_degree, nljump, false, w4.data(), w1.data(), w5.data());
            for (int i = 0; i < n; ++i) season[i] = w2[np + i] - w1[i];
            for (int i = 0; i < n; ++i) w1[i] = y[i] - season[i];
            ess(w1.data(), n, nt, p.t_degree, ntjump, userw, rw.data(), trend.data(), w3.data());
        }
        if (outer >= p.outer) break;
        // Bisquare robustness weights from the current fit.
        std::vector<double> r(n);
        for (int i = 0; i < n; ++i) r[i] = std::abs(y[i] - trend[i] - season[i]);
        std::vector<double> s = r;
        const int m1 = n / 2, m2 = n - m1 - 1;
        std::nth_element(s.begin(), s.begin() + m1, s.end());
        double med = s[m1];
        std::nth_element(s.begin(), s.begin() + m2, s.end());
        med = 0.5 * (med + s[m2]);
        const double cmad = 6.0 * med;
        const double c9 = 0.999 * cmad, c1 = 0.001 * cmad;
        for (int i = 0; i < n; ++i) {
            if (r[i] <= c1) {
                rw[i] = 1.0;
            } else if (r[i] <= c9) {
                const double u = r[i] / cmad;
                rw[i] = (1.0 - u * u) * (1.0 - u * u);
            } else {
                rw[i] = 0.0;
            }
        }
        userw = true;
    }
    StlResult out;
    out.seasonal = std::move(season);
    out.trend = std::move(trend);
    out.remainder.resize(n);
    for (int i = 0; i < n; ++i) out.remainder[i] = y[i] - out.seasonal[i] - out.trend[i];
    return out;
}

/// Local linear tricube smoother with the span picked by generalized
/// cross-validation over a fixed grid of fractions of n.
inline std::vector<double> gcv_local_linear(const std::vector<double>& y) {
    const int n = static_cast<int>(y.size());
    if (n < 8) throw TooShort("trend smoother needs at least 8 values");
    static constexpr double kSpans[] = {0.05, 0.1, 0.2, 0.35, 0.5};
    std::vector<double> best;
    double best_gcv = std::numeric_limits<double>::infinity();
    int last_q = -1;
    for (double frac : kSpans) {
        const int q = std::min(n, std::max(5, static_cast<int>(std::lround(frac * n))));
        if (q == last_q) continue;
        last_q = q;
        std::vector<double> fit(n);
        double trace = 0.0, rss = 0.0;
        for (int i = 0; i < n; ++i) {
            int lo = i - (q - 1) / 2;
            lo = std::clamp(lo, 0, n - q);
            const int hi = lo + q - 1;
            double h = std::max(i - lo, hi - i) + 1.0;
            double sw = 0.0, sx = 0.0;
            std::vector<double> w(q);
            for (int j = lo; j <= hi; ++j) {
                const double u = std::abs(j - i) / h;
                const double t = 1.0 - u * u * u;
                w[j - lo] = t * t * t;
                sw += w[j - lo];
                sx += w[j - lo] * j;
            }
            const double xbar = sx / sw;
            double sxx = 0.0, sxy = 0.0, sy = 0.0;
            for (int j = lo; j <= hi; ++j) {
                const double wj = w[j - lo];
                sxx += wj * (j - xbar) * (j - xbar);
                sxy += wj * (j - xbar) * y[j];
                sy += wj * y[j];
            }
            const double ybar = sy / sw;
            const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
            fit[i] = ybar + slope * (i - xbar);
            const double wi = w[i - lo];
            trace += wi / sw + (sxx > 0.0 ? wi * (i - xbar) * (i - xbar) / sxx : 0.0);
            rss += (y[i] - fit[i]) * (y[i] - fit[i]);
        }
        const double denom = 1.0 - trace / n;
        const double gcv = denom > 0.0 ? (rss / n) / (denom * denom) : std::numeric_limits<double>::infinity();
        if (best.empty() || gcv < best_gcv) {
            best_gcv = gcv;
            best = std::move(fit);
        }
    }
    return best;
}

struct STLDecomposition {
    std::vector<double> trend;
    std::vector<std::vector<double>> seasonal;  ///< one per period, ascending
    std::vector<int> periods;                   ///< seasonal periods actually used
    std::vector<double> remainder;
};

/// Trend plus one seasonal component per period > 1, by backfitting STL fits
/// over the periods for two sweeps. Non-seasonal input gets a smoothed trend only.
inline STLDecomposition stl_decompose_multi(const std::vector<double>& x, std::vector<int> periods,
                                            int sweeps = 2) {
    const int n = static_cast<int>(x.size());
    std::sort(periods.begin(), periods.end());
    periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
    periods.erase(std::remove_if(periods.begin(), periods.end(), [](int p) { return p <= 1; }), periods.end());

    STLDecomposition d;
    d.periods = periods;
    if (periods.empty()) {
        if (n < 8) throw TooShort("decomposition needs at least 8 values");
        d.trend = gcv_local_linear(x);
    } else {
        if (n < 2 * periods.back() + 4) throw TooShort("decomposition needs two full cycles of the largest period");
        const std::size_t M = periods.size();
        d.seasonal.assign(M, std::vector<double>(n, 0.0));
        std::vector<double> work(n);
        for (int s = 0; s < sweeps; ++s) {
            for (std::size_t i = 0; i < M; ++i) {
                for (int t = 0; t < n; ++t) {
                    double v = x[t];
                    for (std::size_t j = 0; j < M; ++j)
                        if (j != i) v -= d.seasonal[j][t];
                    work[t] = v;
                }
                StlParams p;
                p.period = periods[i];
                auto fit = stl(work, p);
                d.seasonal[i] = std::move(fit.seasonal);
                d.trend = std::move(fit.trend);
            }
        }
    }
    d.remainder.resize(n);
    for (int t = 0; t < n; ++t) {
        double v = x[t] - d.trend[t];
        for (const auto& s : d.seasonal) v -= s[t];
        d.remainder[t] = v;
    }
    return d;
}

}  // namespace gratis
