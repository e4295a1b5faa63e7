#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/errors.hpp"
#include "ldhole/geometry.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/primal.hpp"
#include "ldhole/qp.hpp"

namespace ldhole {

/// a = <mu1, mu1>, b = <mu1, mu2>, c = <mu2, mu2> in the kernel inner product.
struct AbcCoefficients {
    double a = 0.0, b = 0.0, c = 0.0;
};

struct AbValues {
    double A = 0.0; ///< a c - b^2
    double B = 0.0; ///< r^2 a - 2 r b + c
    AbcCoefficients abc;
    bool degenerate = false; ///< A and B both vanish
};

inline AbValues ab_from_abc(const AbcCoefficients& k, double r) {
    AbValues v;
    v.abc = k;
    v.A = k.a * k.c - k.b * k.b;
    v.B = r * r * k.a - 2.0 * r * k.b + k.c;
    const double scale = std::max({std::abs(k.a), std::abs(k.c), 1e-300});
    v.degenerate = std::abs(v.A) <= 1e-14 * scale * scale && std::abs(v.B) <= 1e-14 * scale;
    return v;
}

template <CovarianceFunction Cov>
AbValues ab_functionals(const Cov& cov, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, double r) {
    return ab_from_abc({double_integral(cov, mu1, mu1), double_integral(cov, mu1, mu2), double_integral(cov, mu2, mu2)}, r);
}

inline constexpr double kCond1Slack = 1e-12;

inline bool cond1_holds(const AbcCoefficients& k, double r) { return k.b >= r * k.a - kCond1Slack; }

template <CovarianceFunction Cov>
bool cond1_holds(const Cov& cov, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, double r) {
    return cond1_holds(ab_functionals(cov, mu1, mu2, r).abc, r);
}

/// max m1 - r m2 over m1, m2 >= 0 with a m1^2 - 2 b m1 m2 + c m2^2 <= 1.
struct SepSolution {
    double value = 0.0;
    double m1 = 0.0, m2 = 0.0;
    bool second_branch = false;
    bool degenerate = false; ///< value is +inf
};

inline SepSolution sep_solve(double a, double b, double c, double r) {
    if (a < 0.0 || c < 0.0) throw DomainError("sep_solve: a and c must be nonnegative");
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("sep_solve: r must lie in (0, 1]");
    if (b * b > a * c * (1.0 + 1e-10) + 1e-14) throw DomainError("sep_solve: b^2 <= ac violated");
    SepSolution s;
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (b <= r * a) {
        if (a == 0.0) {
            s.value = inf;
            s.degenerate = true;
            return s;
        }
        s.value = 1.0 / std::sqrt(a);
        s.m1 = s.value;
        return s;
    }
    s.second_branch = true;
    const double det = a * c - b * b;
    if (det <= 0.0) {
        s.value = inf;
        s.degenerate = true;
        return s;
    }
    s.value = std::sqrt((c + r * r * a - 2.0 * r * b) / det);
    // m1 : m2 = (c - r b) : (b - r a), scaled onto the ellipse
    const double u = c - r * b, v = b - r * a;
    const double q = a * u * u - 2.0 * b * u * v + c * v * v;
    const double k = 1.0 / std::sqrt(q);
    s.m1 = k * u;
    s.m2 = k * v;
    return s;
}

/// Candidate value of the inner minimum: min(a, A/B) when cond1 holds, a
/// otherwise. Its reciprocal is a lower bound on D.
struct DualValue {
    double value = 0.0;
    bool cond1 = false;
    bool degenerate = false; ///< B = 0, so the A/B branch was skipped
};

inline DualValue dual_value(const AbcCoefficients& k, double r) {
    DualValue out;
    out.value = k.a;
    out.cond1 = cond1_holds(k, r);
    if (!out.cond1) return out;
    const AbValues v = ab_from_abc(k, r);
    if (v.B <= 1e-15 * std::max(k.a, 1e-300)) {
        out.degenerate = true;
        return out;
    }
    out.value = std::min(k.a, std::max(v.A, 0.0) / v.B);
    return out;
}

template <CovarianceFunction Cov>
DualValue dual_value(const Cov& cov, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, double r) {
    return dual_value(ab_functionals(cov, mu1, mu2, r).abc, r);
}

struct DualOptions {
    int max_iterations = 200;   ///< bisection steps on the one-dimensional reformulation
    double tolerance = 1e-10;   ///< relative width in s at which bisection stops
    double s_max = 1e12;        ///< bracketing cap
    double rank_tolerance = 1e-12;
};

enum class DualCase { first, second };

struct DualResult {
    double first_min = 0.0;
    double second_min = std::numeric_limits<double>::infinity(); ///< best cond1-feasible A/B found
    double D = 0.0;
    DualCase governing = DualCase::first;
    DiscreteMeasure mu_first;  ///< optimal measure of the first minimum
    std::optional<DiscreteMeasure> mu1, mu2; ///< measures at the second-min optimum
    double s_star = 0.0;       ///< optimal mass ratio, 0 in the first case
    int evaluations = 0;
};

namespace detail {

struct SplitGram {
    Eigen::MatrixXd g11, g12, g22;
};

inline Eigen::VectorXd uniform_start(Eigen::Index n1, Eigen::Index n2) {
    Eigen::VectorXd x(n1 + n2);
    x.head(n1).setConstant(1.0 / static_cast<double>(n1));
    if (n2 > 0) x.tail(n2).setConstant(1.0 / static_cast<double>(n2));
    return x;
}

} // namespace detail

/// Minimizes the dual representation over measures on K1 and K2.
///
/// With t = m2/m1 the second minimum and the first minimum combine into
/// min over t in [0, 1/r) of |mu1 - t mu2|^2 / (1 - r t)^2. Putting
/// s = t / (1 - r t) turns this into min over s >= 0 of
///   g(s) = min_{mu1, mu2} |(1 + r s) mu1 - s mu2|^2,
/// a convex function of s (it is the squared distance from the origin to a
/// convex set that moves linearly with s). Each g(s) is a QP over a product
/// of simplices; g'(s) comes from the envelope theorem and s* is found by
/// bisection on its sign. s* = 0 is the first case.
template <CovarianceFunction Cov>
DualResult dual_optimize(const Cov& cov, const PointSet& k1, const PointSet& k2, double r, const DualOptions& opt = {}) {
    if (k1.empty()) throw DomainError("dual_optimize: K1 must be nonempty");
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("dual_optimize: r must lie in (0, 1]");
    const auto n1 = static_cast<Eigen::Index>(k1.size());
    const auto n2 = static_cast<Eigen::Index>(k2.size());
    const CovMatrix sig = gram(cov, concat(k1, k2));
    detail::SplitGram g{sig.entries.topLeftCorner(n1, n1), sig.entries.topRightCorner(n1, n2),
                        sig.entries.bottomRightCorner(n2, n2)};

    DualResult res;
    qp::BlockSimplexProblem first{2.0 * g.g11, {}, {n1}};
    const auto fq = qp::solve_block_simplex(first);
    res.first_min = std::max(fq.value, 0.0);
    res.mu_first = DiscreteMeasure::normalized(k1, fq.x);
    res.evaluations = 1;
    auto finish_first = [&] {
        res.governing = DualCase::first;
        res.D = res.first_min > 0.0 ? 1.0 / res.first_min : std::numeric_limits<double>::infinity();
        return res;
    };
    if (n2 == 0) return finish_first();

    // right derivative of g at 0, up to a factor 2: r a - max_j (G21 mu1)_j
    const Eigen::VectorXd pot2 = g.g12.transpose() * fq.x;
    const double a0 = fq.x.dot(g.g11 * fq.x);
    const double scale = std::max(sig.entries.diagonal().maxCoeff(), 1e-300);

    struct Eval {
        double value, slope;
        AbcCoefficients abc;
        Eigen::VectorXd x;
    };
    Eigen::VectorXd warm = detail::uniform_start(n1, n2);
    auto record = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd m1 = x.head(n1), m2 = x.tail(n2);
        const AbcCoefficients k{m1.dot(g.g11 * m1), m1.dot(g.g12 * m2), m2.dot(g.g22 * m2)};
        if (cond1_holds(k, r)) {
            const AbValues v = ab_from_abc(k, r);
            if (v.B > 1e-15 * scale && std::max(v.A, 0.0) / v.B < res.second_min) {
                res.second_min = std::max(v.A, 0.0) / v.B;
                res.mu1 = DiscreteMeasure::normalized(k1, m1);
                res.mu2 = DiscreteMeasure::normalized(k2, m2);
            }
        }
        return k;
    };
    auto eval = [&](double s) {
        const double p = 1.0 + r * s;
        qp::BlockSimplexProblem pr;
        pr.p.resize(n1 + n2, n1 + n2);
        pr.p.topLeftCorner(n1, n1) = 2.0 * p * p * g.g11;
        pr.p.topRightCorner(n1, n2) = -2.0 * s * p * g.g12;
        pr.p.bottomLeftCorner(n2, n1) = -2.0 * s * p * g.g12.transpose();
        pr.p.bottomRightCorner(n2, n2) = 2.0 * s * s * g.g22;
        pr.blocks = {n1, n2};
        const auto q = qp::solve_block_simplex(pr, warm);
        ++res.evaluations;
        warm = q.x;
        const AbcCoefficients k = record(q.x);
        // d/ds of (1 + r s)^2 a - 2 s (1 + r s) b + s^2 c at fixed measures
        const double slope = 2.0 * r * p * k.a - 2.0 * (1.0 + 2.0 * r * s) * k.b + 2.0 * s * k.c;
        return Eval{std::max(q.value, 0.0), slope, k, q.x};
    };

    if (r * a0 >= pot2.maxCoeff() - 1e-13 * scale) {
        // s* = 0; probe a few s so that second_min reports a feasible candidate when one is cheap to find
        for (double s : {0.5, 2.0, 8.0}) eval(s);
        return finish_first();
    }

    double lo = 0.0, hi = 1.0;
    Eval ehi = eval(hi);
    while (ehi.slope < 0.0 && ehi.value > 1e-14 * scale && hi < opt.s_max) {
        lo = hi;
        hi *= 4.0;
        ehi = eval(hi);
    }
    Eval best = ehi;
    if (ehi.value > 1e-14 * scale && ehi.slope < 0.0)
        throw ConvergenceError("dual_optimize: minimum not bracketed below s_max", ehi.slope);
    if (ehi.value > 1e-14 * scale) {
        int it = 0;
        for (; it < opt.max_iterations && hi - lo > opt.tolerance * (1.0 + hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            const Eval em = eval(mid);
            if (em.value < best.value) best = em;
            if (em.slope < 0.0)
                lo = mid;
            else
                hi = mid;
            if (em.value <= 1e-14 * scale) break;
        }
        if (it == opt.max_iterations) throw ConvergenceError("dual_optimize: bisection did not converge", hi - lo);
        const Eval ef = eval(0.5 * (lo + hi));
        if (ef.value < best.value) best = ef;
        res.s_star = 0.5 * (lo + hi);
    } else {
        res.s_star = hi;
    }

    const double gmin = best.value;
    res.governing = DualCase::second;
    if (gmin <= 1e-14 * scale) {
        res.D = std::numeric_limits<double>::infinity();
        res.second_min = 0.0;
    } else {
        res.second_min = std::min(res.second_min, gmin);
        res.D = 1.0 / std::min(res.first_min, res.second_min);
    }
    if (!res.mu1) {
        res.mu1 = DiscreteMeasure::normalized(k1, best.x.head(n1));
        res.mu2 = DiscreteMeasure::normalized(k2, best.x.tail(n2));
    }
    return res;
}

/// |D_dual - D_primal| / D_primal; zero when both are infinite.
inline double duality_gap(const DualResult& dual, const PrimalSolution& primal) {
    if (std::isinf(dual.D) && std::isinf(primal.value)) return 0.0;
    if (std::isinf(dual.D) || std::isinf(primal.value)) return std::numeric_limits<double>::infinity();
    return std::abs(dual.D - primal.value) / primal.value;
}

struct FirstOrderCheck {
    bool is_optimal = false;
    double energy = 0.0;        ///< double integral of R against mu
    double min_potential = 0.0; ///< min over the support nodes of the potential
    Eigen::VectorXd slack;      ///< potential(t) - energy at every node of mu's support
};

/// The measure is optimal for the first minimum iff its energy equals the
/// minimum of its potential over K1 (here: the atoms of mu, zero weights
/// included).
template <CovarianceFunction Cov>
FirstOrderCheck check_first_order(const Cov& cov, const DiscreteMeasure& mu, double tol = 1e-8) {
    const CovMatrix g = gram(cov, mu.support(), false);
    const Eigen::VectorXd m = g.entries * mu.weights();
    FirstOrderCheck out;
    out.energy = mu.weights().dot(m);
    out.slack = m.array() - out.energy;
    out.min_potential = m.minCoeff();
    out.is_optimal = std::abs(out.energy - out.min_potential) <= tol;
    return out;
}

enum class NecStatus { passes, fails, inconclusive };

inline const char* to_string(NecStatus s) {
    switch (s) {
    case NecStatus::passes: return "passes";
    case NecStatus::fails: return "fails";
    default: return "inconclusive";
    }
}

struct NecCond2Check {
    NecStatus status = NecStatus::inconclusive;
    Eigen::VectorXd violation; ///< normalized; positive entries break the inequality or the support equality
    double max_violation = 0.0;
};

/// Necessary condition for mu to solve the ratio problem with K2 = {b}:
/// p1(t) P2 >= p2(t) P1 at every node, with equality on the support of mu,
/// where p_i is the potential and P_i the energy of mu under the kernels
///   R1(s, t) = R(s, t) R(b, b) - R(s, b) R(t, b)
///   R2(s, t) = r^2 R(s, t) - r (R(s, b) + R(t, b)) + R(b, b).
/// Inconclusive when the constraint b >= r a is not strict at mu or P2 <= 0.
template <CovarianceFunction Cov>
NecCond2Check check_nec_cond2(const Cov& cov, const DiscreteMeasure& mu, std::span<const double> b, double r,
                              double tol = 1e-6) {
    const PointSet& k1 = mu.support();
    const auto n = static_cast<Eigen::Index>(k1.size());
    const Eigen::MatrixXd g = gram(cov, k1, false).entries;
    Eigen::VectorXd gb(n);
    for (Eigen::Index i = 0; i < n; ++i) gb(i) = cov(k1[static_cast<std::size_t>(i)], b);
    const double rbb = cov(b, b);
    const Eigen::VectorXd& w = mu.weights();

    NecCond2Check out;
    out.violation = Eigen::VectorXd::Zero(n);
    const double a = w.dot(g * w), bb = w.dot(gb);
    if (!(bb > r * a + 1e-12 * std::max(1.0, a))) return out;

    const Eigen::MatrixXd r1 = g * rbb - gb * gb.transpose();
    const Eigen::MatrixXd r2 = (r * r) * g - r * (gb.rowwise().replicate(n) + gb.transpose().colwise().replicate(n)) +
                               Eigen::MatrixXd::Constant(n, n, rbb);
    const Eigen::VectorXd p1 = r1 * w, p2 = r2 * w;
    const double big1 = w.dot(p1), big2 = w.dot(p2);
    if (!(big2 > 0.0)) return out;

    const double scale = std::max({std::abs(big2) * p1.cwiseAbs().maxCoeff(), std::abs(big1) * p2.cwiseAbs().maxCoeff(), 1e-300});
    const double wtol = 1e-12 * w.maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = (p1(i) * big2 - p2(i) * big1) / scale;
        out.violation(i) = w(i) > wtol ? std::abs(diff) : std::max(0.0, -diff);
    }
    out.max_violation = out.violation.maxCoeff();
    out.status = out.max_violation <= tol ? NecStatus::passes : NecStatus::fails;
    return out;
}

} // namespace ldhole
