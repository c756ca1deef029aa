#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace gratis::optim {

struct NelderMeadOptions {
    int max_iter = 2000;
    double f_tol = 1e-12;   ///< spread of function values across the simplex
    double x_tol = 1e-9;    ///< simplex diameter
    double initial_step = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimizer (standard reflection/expansion/contraction/shrink).
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> s(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += opt.initial_step;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(s[i]);
    auto safe = [](double v) { return std::isfinite(v) ? v : 1e300; };
    for (auto& v : fv) v = safe(v);

    std::vector<std::size_t> idx(n + 1);
    NelderMeadResult res;
    for (int it = 0; it < opt.max_iter; ++it) {
        res.iterations = it;
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];
        double diam = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(s[idx[i]][j] - s[best][j]));
        if (std::abs(fv[worst] - fv[best]) <= opt.f_tol * (std::abs(fv[best]) + 1e-300) && diam <= opt.x_tol) {
            res.converged = true;
            break;
        }
        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c[j] += s[idx[i]][j] / static_cast<double>(n);
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = c[j] + t * (s[worst][j] - c[j]);
            return p;
        };
        auto xr = along(-1.0);
        const double fr = safe(f(xr));
        if (fr < fv[best]) {
            auto xe = along(-2.0);
            const double fe = safe(f(xe));
            if (fe < fr) {
                s[worst] = xe;
                fv[worst] = fe;
            } else {
                s[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            s[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        auto xc = along(outside ? -0.5 : 0.5);
        const double fc = safe(f(xc));
        if (fc < (outside ? fr : fv[worst])) {
            s[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= n; ++i) {
            auto& p = s[idx[i]];
            for (std::size_t j = 0; j < n; ++j) p[j] = s[best][j] + 0.5 * (p[j] - s[best][j]);
            fv[idx[i]] = safe(f(p));
        }
    }
    const auto b = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = s[b];
    res.f = fv[b];
    return res;
}

}  // namespace gratis::optim
