#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace gratis {

struct FeatureMatrix {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<double>>> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return columns.size(); }

    void add(std::string id, const FeatureVector& fv) {
        if (columns.empty()) columns = fv.names;
        if (fv.names != columns) throw SchemaError("feature vector columns differ from matrix columns");
        ids.push_back(std::move(id));
        rows.push_back(fv.values);
    }

    void validate() const {
        if (ids.size() != rows.size()) throw SchemaError("ids and rows differ in length");
        for (const auto& r : rows)
            if (r.size() != columns.size()) throw SchemaError("ragged feature matrix");
    }
};

/// Per-column median/IQR scaler. Kept separately so a fitted scaler can be
/// reapplied to new rows at prediction time.
struct RobustScaler {
    std::vector<double> centers;
    std::vector<double> scales;

    static RobustScaler fit(const FeatureMatrix& fm) {
        fm.validate();
        RobustScaler s;
        s.centers.assign(fm.n_cols(), 0.0);
        s.scales.assign(fm.n_cols(), 1.0);
        for (std::size_t j = 0; j < fm.n_cols(); ++j) {
            std::vector<double> col;
            for (const auto& r : fm.rows)
                if (r[j] && std::isfinite(*r[j])) col.push_back(*r[j]);
            if (col.empty()) continue;
            s.centers[j] = stats::median(col);
            double iqr = stats::quantile(col, 0.75) - stats::quantile(col, 0.25);
            s.scales[j] = iqr > 0.0 ? iqr : 1.0;
        }
        return s;
    }

    /// Absent cells map to the center, i.e. 0 after scaling.
    std::vector<double> transform(const std::vector<std::optional<double>>& row) const {
        if (row.size() != centers.size()) throw SchemaError("row width does not match scaler");
        std::vector<double> out(row.size(), 0.0);
        for (std::size_t j = 0; j < row.size(); ++j)
            if (row[j] && std::isfinite(*row[j])) out[j] = (*row[j] - centers[j]) / scales[j];
        return out;
    }
};

struct ScaledMatrix {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;  ///< rows x columns
    std::vector<std::vector<bool>> imputed;
    RobustScaler scaler;
};

inline ScaledMatrix scale_feature_matrix(const FeatureMatrix& fm) {
    if (fm.n_rows() < 2) throw InvalidArgument("scaling needs at least 2 rows");
    ScaledMatrix out;
    out.columns = fm.columns;
    out.scaler = RobustScaler::fit(fm);
    out.values.resize(static_cast<Eigen::Index>(fm.n_rows()), static_cast<Eigen::Index>(fm.n_cols()));
    out.imputed.assign(fm.n_rows(), std::vector<bool>(fm.n_cols(), false));
    for (std::size_t i = 0; i < fm.n_rows(); ++i) {
        auto r = out.scaler.transform(fm.rows[i]);
        for (std::size_t j = 0; j < r.size(); ++j) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
            out.imputed[i][j] = !(fm.rows[i][j] && std::isfinite(*fm.rows[i][j]));
        }
    }
    return out;
}

struct Embedding2D {
    std::vector<std::array<double, 2>> points;
    std::string method;
    std::uint64_t seed = 0;
    double perplexity = 0.0;
    int iterations = 0;
    bool perplexity_capped = false;
    std::array<double, 2> explained_variance{0.0, 0.0};
    std::vector<double> kl_trace;  ///< t-SNE objective per iteration
};

/// First two principal components. Each component's sign is fixed so that its
/// largest-magnitude loading is positive.
inline Embedding2D pca_embed(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (n < 3) throw InvalidArgument("PCA needs at least 3 rows");
    if (p < 1) throw InvalidArgument("PCA needs at least 1 column");
    Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Embedding2D e;
    e.method = "pca";
    e.points.assign(static_cast<std::size_t>(n), {0.0, 0.0});
    for (int k = 0; k < 2 && k < p; ++k) {
        Eigen::VectorXd v = es.eigenvectors().col(p - 1 - k);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        double lambda = std::max(0.0, es.eigenvalues()(p - 1 - k));
        e.explained_variance[static_cast<std::size_t>(k)] = lambda;
        Eigen::VectorXd proj = c * v;
        for (Eigen::Index i = 0; i < n; ++i) e.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = proj(i);
    }
    return e;
}

inline Embedding2D pca_embed(const ScaledMatrix& m) { return pca_embed(m.values); }

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 1000;
    std::uint64_t seed = 0;
    double exaggeration = 12.0;
    int exaggeration_iters = 250;
    int momentum_switch = 250;
    /// Above this row count each affinity row keeps only its 3*perplexity
    /// nearest neighbours; the repulsive term stays exact.
    std::size_t dense_limit = 3000;
    std::size_t workers = 0;
};

namespace tsne_detail {

/// Sparse row: neighbour indices and conditional probabilities p_{j|i}.
struct Row {
    std::vector<std::uint32_t> idx;
    std::vector<double> p;
};

/// Bisection on the Gaussian precision so that the row's perplexity matches
/// the target. `d2` are squared distances to the candidates in `idx`.
inline Row calibrate(const std::vector<double>& d2, std::vector<std::uint32_t> idx, double perplexity) {
    const double target = std::log(perplexity);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    const std::size_t m = d2.size();
    double dmin = *std::min_element(d2.begin(), d2.end());
    std::vector<double> p(m);
    for (int it = 0; it < 200; ++it) {
        double sum = 0.0, dsum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            p[j] = std::exp(-beta * (d2[j] - dmin));
            sum += p[j];
            dsum += p[j] * (d2[j] - dmin);
        }
        double h = std::log(sum) + beta * dsum / sum;
        double diff = h - target;
        if (std::abs(diff) < 1e-5) break;
        if (diff > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    double sum = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= sum;
    return Row{std::move(idx), std::move(p)};
}

inline double sq_dist(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j) {
    return (x.row(i) - x.row(j)).squaredNorm();
}

}  // namespace tsne_detail

/// Conditional affinity rows p_{j|i} (each sums to 1).
inline std::vector<tsne_detail::Row> tsne_conditional_affinities(const Eigen::MatrixXd& x, double perplexity,
                                                                 std::size_t dense_limit, std::size_t workers = 0) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const bool dense = n <= dense_limit;
    const std::size_t k = dense ? n - 1 : std::min<std::size_t>(n - 1, static_cast<std::size_t>(3.0 * perplexity) + 1);
    std::vector<tsne_detail::Row> rows(n);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> d2;
        std::vector<std::uint32_t> idx;
        d2.reserve(n - 1);
        idx.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            d2.push_back(tsne_detail::sq_dist(x, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            idx.push_back(static_cast<std::uint32_t>(j));
        }
        if (!dense) {
            std::vector<std::size_t> order(d2.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                             [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
            order.resize(k);
            std::sort(order.begin(), order.end());
            std::vector<double> d2k;
            std::vector<std::uint32_t> idxk;
            for (auto o : order) {
                d2k.push_back(d2[o]);
                idxk.push_back(idx[o]);
            }
            d2 = std::move(d2k);
            idx = std::move(idxk);
        }
        rows[i] = tsne_detail::calibrate(d2, std::move(idx), perplexity);
    }, workers);
    return rows;
}

/// Exact-gradient t-SNE. Gains, momentum and early exaggeration follow the
/// usual reference schedule.
inline Embedding2D tsne_embed(const Eigen::MatrixXd& x, const TsneOptions& opt = {}) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    if (n < 4) throw InvalidArgument("t-SNE needs at least 4 rows");
    if (!(opt.perplexity > 0.0)) throw InvalidArgument("perplexity must be positive");
    if (opt.iterations < 1) throw InvalidArgument("iterations must be positive");

    Embedding2D e;
    e.method = "tsne";
    e.seed = opt.seed;
    e.iterations = opt.iterations;
    e.perplexity = opt.perplexity;
    const double cap = (static_cast<double>(n) - 1.0) / 3.0;
    if (e.perplexity >= cap) {
        e.perplexity = std::max(1.0, cap - 1e-9);
        e.perplexity_capped = true;
    }

    auto cond = tsne_conditional_affinities(x, e.perplexity, opt.dense_limit, opt.workers);

    // Symmetrize into CSR: P_ij = (p_{j|i} + p_{i|j}) / 2n.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < cond[i].idx.size(); ++t) {
            std::uint32_t j = cond[i].idx[t];
            double v = cond[i].p[t] / (2.0 * static_cast<double>(n));
            adj[i].emplace_back(j, v);
            adj[j].emplace_back(static_cast<std::uint32_t>(i), v);
        }
    std::vector<std::size_t> start(n + 1, 0);
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    for (std::size_t i = 0; i < n; ++i) {
        auto& a = adj[i];
        std::sort(a.begin(), a.end());
        for (std::size_t t = 0; t < a.size();) {
            std::uint32_t j = a[t].first;
            double v = 0.0;
            while (t < a.size() && a[t].first == j) v += a[t++].second;
            col.push_back(j);
            val.push_back(std::max(v, 1e-300));
        }
        start[i + 1] = col.size();
        a.clear();
        a.shrink_to_fit();
    }
    double plogp = 0.0;
    for (double v : val) plogp += v * std::log(v);

    auto rng = make_rng(opt.seed);
    std::vector<double> y(2 * n), dy(2 * n), upd(2 * n, 0.0), gains(2 * n, 1.0);
    {
        std::normal_distribution<double> nd(0.0, 1e-4);
        for (auto& v : y) v = nd(rng);
    }
    const double eta = std::max(50.0, static_cast<double>(n) / 12.0);
    const std::size_t workers = opt.workers == 0 ? default_workers() : opt.workers;
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers * 4, n));

    std::vector<double> rep(2 * n);
    std::vector<double> zpart(chunks);
    e.kl_trace.reserve(static_cast<std::size_t>(opt.iterations));

    for (int it = 0; it < opt.iterations; ++it) {
        const double exag = it < opt.exaggeration_iters ? opt.exaggeration : 1.0;
        const double mom = it < opt.momentum_switch ? 0.5 : 0.8;

        // Repulsion: unnormalized sum_j w_ij^2 (y_i - y_j) and Z = sum_{i!=j} w_ij.
        std::fill(rep.begin(), rep.end(), 0.0);
        parallel_for(chunks, [&](std::size_t c) {
            double z = 0.0;
            for (std::size_t i = c; i < n; i += chunks) {
                const double yi0 = y[2 * i], yi1 = y[2 * i + 1];
                double r0 = 0.0, r1 = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double a = yi0 - y[2 * j], b = yi1 - y[2 * j + 1];
                    const double w = 1.0 / (1.0 + a * a + b * b);
                    z += w;
                    r0 += w * w * a;
                    r1 += w * w * b;
                }
                rep[2 * i] = r0;
                rep[2 * i + 1] = r1;
            }
            zpart[c] = z - static_cast<double>((n + chunks - 1 - c) / chunks);  // drop the i == j terms
        }, workers);
        const double z = std::accumulate(zpart.begin(), zpart.end(), 0.0);

        double plogw = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double a0 = 0.0, a1 = 0.0;
            for (std::size_t t = start[i]; t < start[i + 1]; ++t) {
                const std::size_t j = col[t];
                const double a = y[2 * i] - y[2 * j], b = y[2 * i + 1] - y[2 * j + 1];
                const double w = 1.0 / (1.0 + a * a + b * b);
                a0 += val[t] * w * a;
                a1 += val[t] * w * b;
                plogw += val[t] * std::log(w);
            }
            dy[2 * i] = 4.0 * (exag * a0 - rep[2 * i] / z);
            dy[2 * i + 1] = 4.0 * (exag * a1 - rep[2 * i + 1] / z);
        }
        e.kl_trace.push_back(plogp - plogw + std::log(z));

        for (std::size_t k = 0; k < 2 * n; ++k) {
            gains[k] = (dy[k] > 0.0) != (upd[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
            if (gains[k] < 0.01) gains[k] = 0.01;
            upd[k] = mom * upd[k] - eta * gains[k] * dy[k];
            y[k] += upd[k];
        }
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m0 += y[2 * i];
            m1 += y[2 * i + 1];
        }
        m0 /= static_cast<double>(n);
        m1 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[2 * i] -= m0;
            y[2 * i + 1] -= m1;
        }
    }

    e.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        e.points[i] = {y[2 * i], y[2 * i + 1]};
        if (!std::isfinite(y[2 * i]) || !std::isfinite(y[2 * i + 1]))
            throw NonFiniteSample("t-SNE produced a non-finite coordinate");
    }
    return e;
}

inline Embedding2D tsne_embed(const ScaledMatrix& m, const TsneOptions& opt = {}) { return tsne_embed(m.values, opt); }

using Points2D = std::vector<std::array<double, 2>>;

struct CoverageGrid {
    int nb = 30;
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

    /// Ranges spanning both point sets; a zero-width axis is widened by 0.5 each way.
    static CoverageGrid spanning(const Points2D& a, const Points2D& b, int nb = 30) {
        if (nb < 2) throw InvalidArgument("grid needs nb >= 2");
        CoverageGrid g;
        g.nb = nb;
        g.x_min = g.y_min = std::numeric_limits<double>::infinity();
        g.x_max = g.y_max = -std::numeric_limits<double>::infinity();
        for (const auto* s : {&a, &b})
            for (const auto& p : *s) {
                g.x_min = std::min(g.x_min, p[0]);
                g.x_max = std::max(g.x_max, p[0]);
                g.y_min = std::min(g.y_min, p[1]);
                g.y_max = std::max(g.y_max, p[1]);
            }
        if (g.x_max == g.x_min) {
            g.x_min -= 0.5;
            g.x_max += 0.5;
        }
        if (g.y_max == g.y_min) {
            g.y_min -= 0.5;
            g.y_max += 0.5;
        }
        return g;
    }

    /// Bin index along one axis; the upper edge falls in the last bin and
    /// points outside the range are clamped.
    int bin(double v, double lo, double hi) const {
        double f = (v - lo) / (hi - lo) * nb;
        int k = static_cast<int>(std::floor(f));
        return std::clamp(k, 0, nb - 1);
    }

    std::size_t cell(const std::array<double, 2>& p) const {
        return static_cast<std::size_t>(bin(p[1], y_min, y_max)) * static_cast<std::size_t>(nb) +
               static_cast<std::size_t>(bin(p[0], x_min, x_max));
    }

    std::vector<bool> occupancy(const Points2D& pts) const {
        std::vector<bool> occ(static_cast<std::size_t>(nb) * static_cast<std::size_t>(nb), false);
        for (const auto& p : pts) occ[cell(p)] = true;
        return occ;
    }
};

/// Share of all nb^2 cells that hold some point of `b` but none of `a`.
inline double miscoverage(const Points2D& a, const Points2D& b, const CoverageGrid& grid) {
    if (a.empty() || b.empty()) throw EmptyDataset("miscoverage needs two nonempty point sets");
    auto oa = grid.occupancy(a);
    auto ob = grid.occupancy(b);
    std::size_t count = 0;
    for (std::size_t i = 0; i < oa.size(); ++i)
        if (ob[i] && !oa[i]) ++count;
    return static_cast<double>(count) / (static_cast<double>(grid.nb) * static_cast<double>(grid.nb));
}

inline double miscoverage(const Points2D& a, const Points2D& b, int nb = 30) {
    if (a.empty() || b.empty()) throw EmptyDataset("miscoverage needs two nonempty point sets");
    return miscoverage(a, b, CoverageGrid::spanning(a, b, nb));
}

struct CoverageReport {
    CoverageGrid grid;
    double miscoverage_ab = 0.0;
    double miscoverage_ba = 0.0;
    std::size_t occupied_a = 0;
    std::size_t occupied_b = 0;
};

inline CoverageReport coverage_report(const Points2D& a, const Points2D& b, int nb = 30) {
    CoverageReport r;
    r.grid = CoverageGrid::spanning(a, b, nb);
    r.miscoverage_ab = miscoverage(a, b, r.grid);
    r.miscoverage_ba = miscoverage(b, a, r.grid);
    auto oa = r.grid.occupancy(a), ob = r.grid.occupancy(b);
    r.occupied_a = static_cast<std::size_t>(std::count(oa.begin(), oa.end(), true));
    r.occupied_b = static_cast<std::size_t>(std::count(ob.begin(), ob.end(), true));
    return r;
}

}  // namespace gratis
