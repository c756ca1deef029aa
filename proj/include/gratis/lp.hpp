#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace gratis {

/// min c'x  s.t.  A x = b,  lo <= x <= hi  (every bound finite).
struct BoundedLP {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

struct LPSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd pi;  ///< simplex multipliers: c_B' B^{-1}
    double objective = 0.0;
    int iterations = 0;
};

namespace lp_detail {

/// Revised bounded-variable simplex on an explicit basis inverse. Columns
/// n..n+m-1 are artificials; Dantzig pricing with a switch to Bland's rule
/// after a run of degenerate pivots.
class Simplex {
public:
    Simplex(const BoundedLP& lp) : lp_(lp), m_(lp.A.rows()), n_(lp.A.cols()) {
        const Eigen::Index N = n_ + m_;
        lo_.resize(N);
        hi_.resize(N);
        x_.resize(N);
        lo_.head(n_) = lp.lo;
        hi_.head(n_) = lp.hi;
        for (Eigen::Index j = 0; j < n_; ++j) {
            if (!(lo_(j) <= hi_(j))) throw InvalidArgument("LP bounds are inconsistent");
            x_(j) = std::abs(lo_(j)) <= std::abs(hi_(j)) ? lo_(j) : hi_(j);
        }
        Eigen::VectorXd r = lp.b - lp.A * x_.head(n_);
        sign_.resize(m_);
        basis_.resize(static_cast<std::size_t>(m_));
        for (Eigen::Index i = 0; i < m_; ++i) {
            sign_(i) = r(i) >= 0.0 ? 1.0 : -1.0;
            lo_(n_ + i) = 0.0;
            hi_(n_ + i) = std::numeric_limits<double>::infinity();
            x_(n_ + i) = std::abs(r(i));
            basis_[static_cast<std::size_t>(i)] = n_ + i;
        }
        in_basis_.assign(static_cast<std::size_t>(N), -1);
        for (Eigen::Index i = 0; i < m_; ++i) in_basis_[static_cast<std::size_t>(n_ + i)] = static_cast<int>(i);
        refactor();
    }

    LPSolution solve(int max_iter) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_ + m_);
        phase1.tail(m_).setOnes();
        run(phase1, max_iter);
        if (x_.tail(m_).sum() > 1e-7 * (1.0 + lp_.b.cwiseAbs().sum())) throw InvalidArgument("LP is infeasible");

        // Fix artificials at zero and push them out of the basis where possible.
        for (Eigen::Index i = 0; i < m_; ++i) {
            hi_(n_ + i) = 0.0;
            x_(n_ + i) = 0.0;
        }
        for (Eigen::Index r = 0; r < m_; ++r) {
            const Eigen::Index var = basis_[static_cast<std::size_t>(r)];
            if (var < n_) continue;
            Eigen::RowVectorXd row = binv_.row(r) * lp_.A;
            Eigen::Index best = -1;
            double mag = 1e-9;
            for (Eigen::Index j = 0; j < n_; ++j)
                if (in_basis_[static_cast<std::size_t>(j)] < 0 && std::abs(row(j)) > mag) {
                    mag = std::abs(row(j));
                    best = j;
                }
            if (best >= 0) pivot(best, r, 0.0, 1.0);
        }
        Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_ + m_);
        phase2.head(n_) = lp_.c;
        run(phase2, max_iter);

        LPSolution s;
        s.x = x_.head(n_);
        s.pi = multipliers(phase2);
        s.objective = lp_.c.dot(s.x);
        s.iterations = iterations_;
        return s;
    }

private:
    Eigen::VectorXd column(Eigen::Index j) const {
        if (j < n_) return lp_.A.col(j);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
        e(j - n_) = sign_(j - n_);
        return e;
    }

    void refactor() {
        Eigen::MatrixXd B(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(basis_[static_cast<std::size_t>(i)]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (!lu.isInvertible()) throw SingularDesign("simplex basis became singular");
        binv_ = lu.inverse();
        // recompute basic values from the nonbasic ones
        Eigen::VectorXd rhs = lp_.b;
        for (Eigen::Index j = 0; j < n_ + m_; ++j)
            if (in_basis_[static_cast<std::size_t>(j)] < 0 && x_(j) != 0.0) rhs -= column(j) * x_(j);
        Eigen::VectorXd xb = binv_ * rhs;
        for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
        since_refactor_ = 0;
    }

    Eigen::VectorXd multipliers(const Eigen::VectorXd& cost) const {
        Eigen::VectorXd cb(m_);
        for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
        return binv_.transpose() * cb;
    }

    /// Entering j moves by `step` in direction `dir` (+1 up, -1 down); row r leaves
    /// (r < 0 means a bound flip of j).
    void pivot(Eigen::Index j, Eigen::Index r, double step, double dir) {
        const Eigen::VectorXd alpha = binv_ * column(j);
        for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) -= dir * step * alpha(i);
        x_(j) += dir * step;
        if (r < 0) return;
        const Eigen::Index leave = basis_[static_cast<std::size_t>(r)];
        // snap the leaving variable onto the bound it reached
        x_(leave) = std::abs(x_(leave) - lo_(leave)) <= std::abs(x_(leave) - hi_(leave)) ? lo_(leave) : hi_(leave);
        in_basis_[static_cast<std::size_t>(leave)] = -1;
        in_basis_[static_cast<std::size_t>(j)] = static_cast<int>(r);
        basis_[static_cast<std::size_t>(r)] = j;
        const double piv = alpha(r);
        binv_.row(r) /= piv;
        for (Eigen::Index i = 0; i < m_; ++i)
            if (i != r && alpha(i) != 0.0) binv_.row(i) -= alpha(i) * binv_.row(r);
        if (++since_refactor_ >= 64) refactor();
    }

    void run(const Eigen::VectorXd& cost, int max_iter) {
        constexpr double opt_tol = 1e-9, piv_tol = 1e-9;
        int degenerate = 0;
        for (;;) {
            if (++iterations_ > max_iter) throw Error("simplex iteration limit reached");
            const Eigen::VectorXd pi = multipliers(cost);
            const bool bland = degenerate > 50;
            Eigen::Index enter = -1;
            double best = 0.0, dir = 0.0;
            for (Eigen::Index j = 0; j < n_ + m_; ++j) {
                if (in_basis_[static_cast<std::size_t>(j)] >= 0 || lo_(j) == hi_(j)) continue;
                const double dj = cost(j) - (j < n_ ? pi.dot(lp_.A.col(j)) : pi(j - n_) * sign_(j - n_));
                double gain = 0.0, d = 0.0;
                if (x_(j) <= lo_(j) && dj < -opt_tol) {
                    gain = -dj;
                    d = 1.0;
                } else if (x_(j) >= hi_(j) && dj > opt_tol) {
                    gain = dj;
                    d = -1.0;
                }
                if (d == 0.0) continue;
                if (bland) {
                    enter = j;
                    dir = d;
                    break;
                }
                if (gain > best) {
                    best = gain;
                    enter = j;
                    dir = d;
                }
            }
            if (enter < 0) return;

            const Eigen::VectorXd alpha = binv_ * column(enter);
            double step = hi_(enter) - lo_(enter);
            Eigen::Index leave = -1;
            for (Eigen::Index i = 0; i < m_; ++i) {
                const double a = dir * alpha(i);  // basic value moves by -step * a
                if (std::abs(a) < piv_tol) continue;
                const Eigen::Index v = basis_[static_cast<std::size_t>(i)];
                const double room = a > 0 ? x_(v) - lo_(v) : hi_(v) - x_(v);
                const double t = std::max(room, 0.0) / std::abs(a);
                if (t < step || (t == step && leave >= 0 && bland && v < basis_[static_cast<std::size_t>(leave)])) {
                    step = t;
                    leave = i;
                }
            }
            if (!std::isfinite(step)) throw Error("LP is unbounded");
            degenerate = step < 1e-12 ? degenerate + 1 : 0;
            pivot(enter, leave, step, dir);
        }
    }

    const BoundedLP& lp_;
    Eigen::Index m_, n_;
    Eigen::VectorXd lo_, hi_, x_, sign_;
    std::vector<Eigen::Index> basis_;
    std::vector<int> in_basis_;
    Eigen::MatrixXd binv_;
    int since_refactor_ = 0;
    int iterations_ = 0;
};

}  // namespace lp_detail

inline LPSolution solve_bounded_lp(const BoundedLP& lp, int max_iter = 1000000) {
    if (lp.A.rows() != lp.b.size() || lp.A.cols() != lp.c.size() || lp.lo.size() != lp.c.size() ||
        lp.hi.size() != lp.c.size())
        throw InvalidArgument("LP dimensions disagree");
    if (!lp.lo.allFinite() || !lp.hi.allFinite()) throw InvalidArgument("LP bounds must be finite");
    lp_detail::Simplex s(lp);
    return s.solve(max_iter);
}

}  // namespace gratis
