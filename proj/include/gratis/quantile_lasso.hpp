#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "forecast.hpp"
#include "instance_space.hpp"
#include "lp.hpp"
#include "parallel.hpp"

namespace gratis {

inline double check_loss(double r, double tau) { return r >= 0.0 ? tau * r : (tau - 1.0) * r; }

struct QuantileFit {
    Eigen::VectorXd beta;  ///< intercept first, then one per column of X
    Eigen::VectorXd d;     ///< dual weights per observation, in [tau-1, tau]
    Eigen::VectorXd s;     ///< dual penalty slacks per column, |s_j| <= lambda*omega_j
    double objective = 0.0;
    int iterations = 0;
};

/// Primal objective: sum rho_tau(y - b0 - X b) + lambda * sum omega_j |b_j|.
inline double quantile_lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                                       double tau, double lambda, const Eigen::VectorXd& omega) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) f += check_loss(y(i) - beta(0) - X.row(i).dot(beta.tail(X.cols())), tau);
    for (Eigen::Index j = 0; j < X.cols(); ++j) f += lambda * omega(j) * std::abs(beta(j + 1));
    return f;
}

/// Penalized quantile regression through its dual LP:
///   max y'd  s.t.  1'd = 0,  X_j'd + s_j = 0,  d in [tau-1, tau]^n,  |s_j| <= lambda*omega_j.
/// The coefficients are the negated simplex multipliers of that LP.
inline QuantileFit quantile_lasso_lp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, double lambda,
                                     const Eigen::VectorXd& omega) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (y.size() != n) throw InvalidArgument("X and y differ in rows");
    if (omega.size() != p) throw InvalidArgument("omega must have one entry per column");
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0,1)");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
    if (n < 1) throw InvalidArgument("quantile regression needs data");

    std::vector<Eigen::Index> slack_cols;
    for (Eigen::Index j = 0; j < p; ++j)
        if (lambda * omega(j) > 0.0) slack_cols.push_back(j);
    const Eigen::Index ns = static_cast<Eigen::Index>(slack_cols.size());

    BoundedLP lp;
    lp.A = Eigen::MatrixXd::Zero(p + 1, n + ns);
    lp.A.block(0, 0, 1, n).setOnes();
    lp.A.block(1, 0, p, n) = X.transpose();
    lp.b = Eigen::VectorXd::Zero(p + 1);
    lp.c.resize(n + ns);
    lp.lo.resize(n + ns);
    lp.hi.resize(n + ns);
    lp.c.head(n) = -y;
    lp.lo.head(n).setConstant(tau - 1.0);
    lp.hi.head(n).setConstant(tau);
    for (Eigen::Index k = 0; k < ns; ++k) {
        const Eigen::Index j = slack_cols[static_cast<std::size_t>(k)];
        lp.A(j + 1, n + k) = 1.0;
        lp.c(n + k) = 0.0;
        lp.lo(n + k) = -lambda * omega(j);
        lp.hi(n + k) = lambda * omega(j);
    }
    auto sol = solve_bounded_lp(lp);

    QuantileFit f;
    f.beta = -sol.pi;
    f.d = sol.x.head(n);
    f.s = Eigen::VectorXd::Zero(p);
    for (Eigen::Index k = 0; k < ns; ++k) f.s(slack_cols[static_cast<std::size_t>(k)]) = sol.x(n + k);
    f.objective = quantile_lasso_objective(X, y, f.beta, tau, lambda, omega);
    f.iterations = sol.iterations;
    return f;
}

struct QuantileLassoOptions {
    double tau = 0.5;
    std::vector<double> lambdas;  ///< empty: automatic geometric grid plus 0
    int folds = 5;
    int grid_size = 12;
};

struct MetaModel {
    std::string method;
    std::vector<std::string> feature_names;
    RobustScaler scaler;
    std::vector<bool> dropped;          ///< columns with zero spread after scaling
    std::vector<double> coefficients;   ///< intercept, then one per feature (0 for dropped)
    std::vector<double> omega;          ///< adaptive weights per feature (0 for dropped)
    double tau = 0.5;
    double lambda = 0.0;
    std::vector<double> lambda_grid;
    std::vector<double> cv_loss;
    std::vector<std::string> flags;

    double predict(const std::vector<std::optional<double>>& row) const {
        const auto z = scaler.transform(row);
        double v = coefficients.at(0);
        for (std::size_t j = 0; j < z.size(); ++j) v += coefficients[j + 1] * z[j];
        return v;
    }

    double predict(const FeatureVector& fv) const {
        if (fv.names != feature_names) throw SchemaError("feature vector does not match the model's feature order");
        return predict(fv.values);
    }
};

namespace qlasso_detail {

/// Largest lambda at which the intercept-only dual is still feasible.
inline double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, const Eigen::VectorXd& omega) {
    auto f0 = quantile_lasso_lp(Eigen::MatrixXd(X.rows(), 0), y, tau, 0.0, Eigen::VectorXd(0));
    double lm = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (omega(j) > 0.0) lm = std::max(lm, std::abs(X.col(j).dot(f0.d)) / omega(j));
    return lm;
}

}  // namespace qlasso_detail

/// Adaptive-lasso quantile regression on robust-scaled features. Penalty
/// weights come from an unpenalized fit on all rows; lambda is chosen by
/// k-fold check loss (ties go to the larger lambda).
inline MetaModel fit_quantile_lasso(const FeatureMatrix& fm, const std::vector<double>& y,
                                    const QuantileLassoOptions& opt = {}, const std::string& method = "") {
    fm.validate();
    if (y.size() != fm.n_rows()) throw InvalidArgument("response length does not match feature rows");
    if (opt.folds < 2) throw InvalidArgument("need at least 2 folds");

    MetaModel mm;
    mm.method = method;
    mm.feature_names = fm.columns;
    mm.tau = opt.tau;
    const ScaledMatrix sm = scale_feature_matrix(fm);
    mm.scaler = sm.scaler;
    const Eigen::Index n = sm.values.rows(), P = sm.values.cols();

    std::vector<Eigen::Index> keep;
    mm.dropped.assign(static_cast<std::size_t>(P), false);
    for (Eigen::Index j = 0; j < P; ++j) {
        const double lo = sm.values.col(j).minCoeff(), hi = sm.values.col(j).maxCoeff();
        if (hi - lo > 1e-12) keep.push_back(j);
        else {
            mm.dropped[static_cast<std::size_t>(j)] = true;
            mm.flags.push_back("degenerate_design:" + fm.columns[static_cast<std::size_t>(j)]);
        }
    }
    const Eigen::Index p = static_cast<Eigen::Index>(keep.size());
    if (n < p + 2) throw InvalidArgument("quantile lasso needs rows >= columns + 2");
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index k = 0; k < p; ++k) X.col(k) = sm.values.col(keep[static_cast<std::size_t>(k)]);
    Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

    const auto pilot = quantile_lasso_lp(X, yy, opt.tau, 0.0, Eigen::VectorXd::Zero(p));
    Eigen::VectorXd omega(p);
    for (Eigen::Index k = 0; k < p; ++k) omega(k) = 1.0 / (std::abs(pilot.beta(k + 1)) + 1e-6);

    std::vector<double> grid = opt.lambdas;
    if (grid.empty()) {
        const double lm = p > 0 ? qlasso_detail::lambda_max(X, yy, opt.tau, omega) : 0.0;
        if (lm > 0.0)
            for (int g = 0; g < opt.grid_size - 1; ++g)
                grid.push_back(lm * std::pow(1e-4, static_cast<double>(g) / (opt.grid_size - 2)));
        grid.push_back(0.0);
    }
    std::sort(grid.begin(), grid.end(), std::greater<>());
    mm.lambda_grid = grid;
    mm.cv_loss.assign(grid.size(), 0.0);

    if (grid.size() > 1) {
        for (int f = 0; f < opt.folds; ++f) {
            std::vector<Eigen::Index> tr, te;
            for (Eigen::Index i = 0; i < n; ++i) (i % opt.folds == f ? te : tr).push_back(i);
            if (te.empty() || static_cast<Eigen::Index>(tr.size()) < p + 2) continue;
            Eigen::MatrixXd Xt(static_cast<Eigen::Index>(tr.size()), p);
            Eigen::VectorXd yt(static_cast<Eigen::Index>(tr.size()));
            for (std::size_t r = 0; r < tr.size(); ++r) {
                Xt.row(static_cast<Eigen::Index>(r)) = X.row(tr[r]);
                yt(static_cast<Eigen::Index>(r)) = yy(tr[r]);
            }
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const auto fit = quantile_lasso_lp(Xt, yt, opt.tau, grid[g], omega);
                double loss = 0.0;
                for (auto i : te) loss += check_loss(yy(i) - fit.beta(0) - X.row(i).dot(fit.beta.tail(p)), opt.tau);
                mm.cv_loss[g] += loss / static_cast<double>(n);
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (mm.cv_loss[g] < mm.cv_loss[best] - 1e-12) best = g;
    mm.lambda = grid[best];

    const auto fit = quantile_lasso_lp(X, yy, opt.tau, mm.lambda, omega);
    mm.coefficients.assign(static_cast<std::size_t>(P) + 1, 0.0);
    mm.omega.assign(static_cast<std::size_t>(P), 0.0);
    mm.coefficients[0] = fit.beta(0);
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto j = static_cast<std::size_t>(keep[static_cast<std::size_t>(k)]);
        mm.coefficients[j + 1] = fit.beta(k + 1);
        mm.omega[j] = omega(k);
    }
    return mm;
}

/// One meta-model per method, fitted on the matching MASE column.
inline std::vector<MetaModel> fit_meta_models(const TrainingTable& table, const QuantileLassoOptions& opt = {},
                                              std::size_t workers = 0) {
    std::vector<MetaModel> out(table.methods.size());
    parallel_for(table.methods.size(), [&](std::size_t k) {
        std::vector<double> y;
        y.reserve(table.mase.size());
        for (const auto& row : table.mase) y.push_back(row[k]);
        out[k] = fit_quantile_lasso(table.features, y, opt, to_string(table.methods[k]));
    }, workers);
    return out;
}

struct Selection {
    std::size_t index = 0;
    std::string method;
    std::vector<double> predicted;  ///< clamped below at 1e-6
};

inline Selection predict_and_select(const std::vector<MetaModel>& models, const FeatureVector& fv) {
    if (models.empty()) throw InvalidArgument("no meta-models supplied");
    Selection s;
    for (const auto& m : models) s.predicted.push_back(std::max(m.predict(fv), 1e-6));
    for (std::size_t k = 1; k < s.predicted.size(); ++k)
        if (s.predicted[k] < s.predicted[s.index]) s.index = k;
    s.method = models[s.index].method;
    return s;
}

/// w_m proportional to exp(1 / M_m^3), with M clamped at 1e-6 and the exponent
/// capped at 700.
inline std::vector<double> averaging_weights(const std::vector<double>& predicted) {
    if (predicted.empty()) throw InvalidArgument("no predictions supplied");
    std::vector<double> a(predicted.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double m = std::max(predicted[k], 1e-6);
        a[k] = std::min(1.0 / (m * m * m), 700.0);
    }
    const double top = *std::max_element(a.begin(), a.end());
    double sum = 0.0;
    for (auto& v : a) sum += (v = std::exp(v - top));
    for (auto& v : a) v /= sum;
    return a;
}

inline std::vector<double> combine_forecasts(const std::vector<std::vector<double>>& forecasts,
                                             const std::vector<double>& weights) {
    if (forecasts.size() != weights.size() || forecasts.empty()) throw InvalidArgument("forecasts and weights differ");
    std::vector<double> out(forecasts.front().size(), 0.0);
    for (std::size_t k = 0; k < forecasts.size(); ++k) {
        if (forecasts[k].size() != out.size()) throw InvalidArgument("forecast lengths differ");
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[k] * forecasts[k][j];
    }
    return out;
}

}  // namespace gratis
