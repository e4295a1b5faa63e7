#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/errors.hpp"

namespace ldhole::qp {

/// Result of min ||E u - f|| subject to u >= 0.
struct NnlsResult {
    Eigen::VectorXd u;
    Eigen::VectorXd residual; ///< E u - f
    int iterations = 0;
};

/// Lawson-Hanson active-set NNLS. Each passive-set subproblem is solved by
/// a Householder QR of the passive columns.
inline NnlsResult nnls(const Eigen::MatrixXd& e, const Eigen::VectorXd& f, int max_iterations = 0) {
    const Eigen::Index n = e.cols();
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 10);
    const double tol = 1e-13 * std::max(1.0, e.colwise().norm().maxCoeff()) * std::max(1.0, f.norm());

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    std::vector<char> passive(static_cast<std::size_t>(n), 0);
    auto solve_passive = [&](Eigen::VectorXd& s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Eigen::MatrixXd ep(e.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) ep.col(static_cast<Eigen::Index>(k)) = e.col(idx[k]);
        const Eigen::VectorXd sp = ep.colPivHouseholderQr().solve(f);
        s.setZero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) s(idx[k]) = sp(static_cast<Eigen::Index>(k));
    };

    int iter = 0;
    Eigen::VectorXd w = e.transpose() * (f - e * u);
    while (true) {
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0) break;
        if (++iter > max_iterations) throw ConvergenceError("nnls: iteration cap reached", best_w);
        passive[static_cast<std::size_t>(best)] = 1;

        Eigen::VectorXd s;
        for (int inner = 0;; ++inner) {
            solve_passive(s);
            double alpha = 1.0;
            bool blocked = false;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    blocked = true;
                    const double denom = u(j) - s(j);
                    alpha = std::min(alpha, denom > 0.0 ? u(j) / denom : 0.0);
                }
            if (!blocked) break;
            if (inner > n) throw ConvergenceError("nnls: inner loop did not terminate", 0.0);
            u += alpha * (s - u);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && u(j) <= 1e-15 * std::max(1.0, u.cwiseAbs().maxCoeff())) {
                    passive[static_cast<std::size_t>(j)] = 0;
                    u(j) = 0.0;
                }
        }
        u = s;
        w = e.transpose() * (f - e * u);
    }
    return {u, e * u - f, iter};
}

/// Result of min ||y||^2 subject to G y >= h.
struct LdpResult {
    bool feasible = false;
    Eigen::VectorXd y;          ///< minimizer (empty when infeasible)
    Eigen::VectorXd multipliers; ///< z >= 0 with y = G^T z
    double value = std::numeric_limits<double>::infinity();
    double certificate = 0.0;   ///< ||E u - f||^2 from the NNLS; 0 means infeasible
    int iterations = 0;
};

/// Least-distance programming through NNLS on E = [G^T; h^T], f = e_last.
/// The problem is declared infeasible when the NNLS residual norm squared
/// falls to `infeasibility_threshold`.
inline LdpResult least_distance(const Eigen::MatrixXd& g, const Eigen::VectorXd& h,
                                double infeasibility_threshold = 1e-9) {
    const Eigen::Index m = g.rows(), k = g.cols();
    Eigen::MatrixXd e(k + 1, m);
    e.topRows(k) = g.transpose();
    e.row(k) = h.transpose();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(k + 1);
    f(k) = 1.0;

    const NnlsResult nn = nnls(e, f);
    LdpResult out;
    out.iterations = nn.iterations;
    out.certificate = nn.residual.squaredNorm();
    const double last = nn.residual(k); // equals -||residual||^2 at the optimum
    if (out.certificate <= infeasibility_threshold || !(last < 0.0)) return out;
    out.feasible = true;
    out.y = -nn.residual.head(k) / last;
    out.multipliers = nn.u / (-last);
    out.value = out.y.squaredNorm();
    return out;
}

/// Euclidean projection onto {x >= 0, sum x = total}.
inline void project_simplex(Eigen::Ref<Eigen::VectorXd> v, double total = 1.0) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        cum += s[i];
        const double t = (cum - total) / static_cast<double>(i + 1);
        if (i + 1 == s.size() || s[i + 1] <= t) {
            theta = t;
            break;
        }
    }
    v = (v.array() - theta).max(0.0).matrix();
}

/// Variables are partitioned into consecutive blocks; each block lies on a
/// probability simplex.
struct BlockSimplexProblem {
    Eigen::MatrixXd p;              ///< symmetric PSD Hessian
    Eigen::VectorXd q;              ///< linear term (may be empty = zero)
    std::vector<Eigen::Index> blocks; ///< block sizes, summing to p.rows()
};

struct BlockSimplexResult {
    Eigen::VectorXd x;
    double value = 0.0;        ///< 0.5 x^T P x + q^T x
    Eigen::VectorXd gradient;  ///< P x + q
    Eigen::VectorXd block_multipliers;
    int iterations = 0;
    bool used_fallback = false;
};

struct BlockSimplexOptions {
    int max_iterations = 0;      ///< active-set cap; 0 means 20 * n + 50
    double ridge = 1e-13;        ///< relative diagonal shift for strict convexity
    int fallback_iterations = 200000;
    double fallback_tolerance = 1e-13;
};

namespace detail {

inline std::vector<Eigen::Index> block_of(const std::vector<Eigen::Index>& blocks, Eigen::Index n) {
    std::vector<Eigen::Index> owner(static_cast<std::size_t>(n));
    Eigen::Index pos = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (Eigen::Index i = 0; i < blocks[b]; ++i) owner[static_cast<std::size_t>(pos++)] = static_cast<Eigen::Index>(b);
    return owner;
}

inline BlockSimplexResult finish(const BlockSimplexProblem& pr, Eigen::VectorXd x, int iterations, bool fallback) {
    BlockSimplexResult r;
    r.gradient = pr.p * x;
    if (pr.q.size() > 0) r.gradient += pr.q;
    r.value = 0.5 * x.dot(pr.p * x) + (pr.q.size() > 0 ? pr.q.dot(x) : 0.0);
    // block multiplier: smallest reduced gradient over the block support
    r.block_multipliers.resize(static_cast<Eigen::Index>(pr.blocks.size()));
    Eigen::Index pos = 0;
    for (std::size_t b = 0; b < pr.blocks.size(); ++b) {
        double lam = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = pos; i < pos + pr.blocks[b]; ++i) lam = std::min(lam, r.gradient(i));
        r.block_multipliers(static_cast<Eigen::Index>(b)) = lam;
        pos += pr.blocks[b];
    }
    r.x = std::move(x);
    r.iterations = iterations;
    r.used_fallback = fallback;
    return r;
}

} // namespace detail

/// Accelerated projected gradient (FISTA with adaptive restart) over the
/// product of simplices.
inline BlockSimplexResult solve_block_simplex_pg(const BlockSimplexProblem& pr, Eigen::VectorXd x0,
                                                 int max_iterations = 200000, double tol = 1e-13) {
    const Eigen::Index n = pr.p.rows();
    auto project = [&](Eigen::VectorXd& v) {
        Eigen::Index pos = 0;
        for (Eigen::Index len : pr.blocks) {
            project_simplex(v.segment(pos, len));
            pos += len;
        }
    };
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pr.p, Eigen::EigenvaluesOnly);
    const double lip = std::max(es.eigenvalues().maxCoeff(), 1e-300);
    const double step = 1.0 / lip;
    auto grad = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd g = pr.p * v;
        if (pr.q.size() > 0) g += pr.q;
        return g;
    };
    auto objective = [&](const Eigen::VectorXd& v) {
        return 0.5 * v.dot(pr.p * v) + (pr.q.size() > 0 ? pr.q.dot(v) : 0.0);
    };
    Eigen::VectorXd x = x0.size() == n ? x0 : Eigen::VectorXd::Constant(n, 0.0);
    if (x0.size() != n) {
        Eigen::Index pos = 0;
        for (Eigen::Index len : pr.blocks) {
            x.segment(pos, len).setConstant(1.0 / static_cast<double>(len));
            pos += len;
        }
    }
    project(x);
    Eigen::VectorXd yv = x, xprev = x;
    double t = 1.0, fprev = objective(x);
    int it = 0;
    for (; it < max_iterations; ++it) {
        Eigen::VectorXd xn = yv - step * grad(yv);
        project(xn);
        const double fn = objective(xn);
        const double move = (xn - x).lpNorm<Eigen::Infinity>();
        if (fn > fprev) { // restart momentum
            t = 1.0;
            yv = x;
            continue;
        }
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        yv = xn + ((t - 1.0) / tn) * (xn - x);
        xprev = x;
        x = xn;
        t = tn;
        fprev = fn;
        if (move < tol) break;
    }
    return detail::finish(pr, x, it, true);
}

/// Primal active-set method for min 0.5 x^T P x + q^T x over a product of
/// simplices. `warm_start` (optional) must be feasible; its zero entries
/// seed the working set. Falls back to projected gradient if the active
/// set cycles past the iteration cap.
inline BlockSimplexResult solve_block_simplex(const BlockSimplexProblem& pr, const Eigen::VectorXd& warm_start = {},
                                              const BlockSimplexOptions& opt = {}) {
    const Eigen::Index n = pr.p.rows();
    if (pr.p.cols() != n) throw DomainError("solve_block_simplex: Hessian must be square");
    if (std::accumulate(pr.blocks.begin(), pr.blocks.end(), Eigen::Index{0}) != n)
        throw DomainError("solve_block_simplex: block sizes do not match the Hessian");
    for (Eigen::Index len : pr.blocks)
        if (len < 1) throw DomainError("solve_block_simplex: empty block");
    const auto owner = detail::block_of(pr.blocks, n);
    const auto nb = static_cast<Eigen::Index>(pr.blocks.size());
    const int cap = opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(20 * n + 50);

    const double diag = std::max(pr.p.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXd p = pr.p;
    p.diagonal().array() += opt.ridge * diag;
    Eigen::VectorXd q = pr.q.size() > 0 ? pr.q : Eigen::VectorXd::Zero(n);

    Eigen::VectorXd x(n);
    std::vector<char> free(static_cast<std::size_t>(n), 1);
    if (warm_start.size() == n) {
        x = warm_start;
        for (Eigen::Index i = 0; i < n; ++i)
            if (x(i) <= 0.0) {
                x(i) = 0.0;
                free[static_cast<std::size_t>(i)] = 0;
            }
    } else {
        Eigen::Index pos = 0;
        for (Eigen::Index len : pr.blocks) {
            x.segment(pos, len).setConstant(1.0 / static_cast<double>(len));
            pos += len;
        }
    }

    const double gtol = 1e-12;
    for (int it = 0; it < cap; ++it) {
        std::vector<Eigen::Index> fidx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (free[static_cast<std::size_t>(i)]) fidx.push_back(i);
        const auto nf = static_cast<Eigen::Index>(fidx.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + nb, nf + nb);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + nb);
        for (Eigen::Index a = 0; a < nf; ++a) {
            for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = p(fidx[a], fidx[b]);
            const Eigen::Index blk = owner[static_cast<std::size_t>(fidx[a])];
            kkt(a, nf + blk) = 1.0;
            kkt(nf + blk, a) = 1.0;
            rhs(a) = -q(fidx[a]);
        }
        for (Eigen::Index b = 0; b < nb; ++b) rhs(nf + b) = 1.0;
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);

        Eigen::VectorXd xhat = Eigen::VectorXd::Zero(n);
        for (Eigen::Index a = 0; a < nf; ++a) xhat(fidx[a]) = sol(a);

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index a = 0; a < nf; ++a) {
            const Eigen::Index i = fidx[a];
            if (xhat(i) < 0.0) {
                const double denom = x(i) - xhat(i);
                const double ai = denom > 0.0 ? x(i) / denom : 0.0;
                if (ai < alpha) {
                    alpha = ai;
                    blocking = i;
                }
            }
        }
        if (blocking >= 0) {
            x += alpha * (xhat - x);
            x(blocking) = 0.0;
            free[static_cast<std::size_t>(blocking)] = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (free[static_cast<std::size_t>(i)] && x(i) <= 0.0) {
                    x(i) = 0.0;
                    free[static_cast<std::size_t>(i)] = 0;
                }
            continue;
        }
        x = xhat;
        // multipliers of the simplex rows: -sol tail
        const Eigen::VectorXd g = p * x + q;
        double worst = 0.0;
        Eigen::Index enter = -1;
        const double scale = 1.0 + g.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (free[static_cast<std::size_t>(i)]) continue;
            const double reduced = g(i) + sol(nf + owner[static_cast<std::size_t>(i)]);
            if (reduced < worst - gtol * scale) {
                worst = reduced;
                enter = i;
            }
        }
        if (enter < 0) return detail::finish(pr, x, it + 1, false);
        free[static_cast<std::size_t>(enter)] = 1;
    }
    return solve_block_simplex_pg(pr, x, opt.fallback_iterations, opt.fallback_tolerance);
}

} // namespace ldhole::qp
