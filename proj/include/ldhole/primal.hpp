#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/errors.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/parallel.hpp"
#include "ldhole/points.hpp"
#include "ldhole/qp.hpp"

namespace ldhole {

/// Cheapest element H of the span of the field with E(X(t)H) >= 1 on K1 and
/// E(X(t)H) <= r on K2. K2 may be empty.
template <CovarianceFunction Cov>
struct HoleProblem {
    Cov covariance;
    PointSet k1;
    PointSet k2;
    double r = 1.0;

    void validate() const {
        if (k1.empty()) throw DomainError("HoleProblem: K1 must be nonempty");
        if (!(r > 0.0 && r <= 1.0)) throw DomainError("HoleProblem: r must lie in (0, 1]");
        if (!k2.empty() && k2.dim() != k1.dim()) throw DomainError("HoleProblem: K1 and K2 dimensions differ");
    }

    /// K1 nodes followed by K2 nodes.
    PointSet nodes() const { return concat(k1, k2); }
};

enum class SolveStatus { optimal, infeasible };

inline const char* to_string(SolveStatus s) { return s == SolveStatus::optimal ? "optimal" : "infeasible"; }

/// H = sum_i coefficients[i] X(nodes[i]). `value` is E H^2 (infinite when
/// infeasible). Coefficients on K1 nodes are nonnegative, on K2 nodes
/// nonpositive: they are the Lagrange multipliers of the constraints.
struct PrimalSolution {
    SolveStatus status = SolveStatus::infeasible;
    double value = std::numeric_limits<double>::infinity();
    PointSet nodes;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd witness_at_nodes; ///< sum_j c_j R(t_i, t_j)
    double max_violation = 0.0;       ///< largest constraint violation at the nodes
    std::size_t k1_size = 0;
    double r = 1.0;
    int rank = 0;                     ///< numerical rank of the node Gram
    int iterations = 0;
    double feasibility_certificate = 0.0;
};

struct PrimalOptions {
    double rank_tolerance = 1e-12;        ///< relative eigenvalue cutoff of the Gram
    double infeasibility_threshold = 1e-9;
};

/// Solves the discretized hole problem through its least-distance form.
///
/// With the node Gram factored as Sigma = F F^T, every H in the span is
/// H = y^T Z for a standard normal vector Z, E H^2 = |y|^2 and the profile at
/// the nodes is F y. The constraints are linear in y, so the problem is
/// min |y|^2 subject to G y >= h, solved by NNLS on its dual (an active-set
/// method over the constraint multipliers).
template <CovarianceFunction Cov>
PrimalSolution solve_primal(const HoleProblem<Cov>& problem, const PrimalOptions& opt = {}) {
    problem.validate();
    PrimalSolution sol;
    sol.nodes = problem.nodes();
    sol.k1_size = problem.k1.size();
    sol.r = problem.r;
    const CovMatrix sigma = gram(problem.covariance, sol.nodes);
    const Eigen::MatrixXd f = spectral_factor(sigma.entries, opt.rank_tolerance);
    sol.rank = static_cast<int>(f.cols());

    const auto n1 = static_cast<Eigen::Index>(problem.k1.size());
    const auto n = static_cast<Eigen::Index>(sol.nodes.size());
    Eigen::MatrixXd g = f;
    Eigen::VectorXd h(n);
    h.head(n1).setOnes();
    g.bottomRows(n - n1) *= -1.0;
    h.tail(n - n1).setConstant(-problem.r);

    const qp::LdpResult ldp = qp::least_distance(g, h, opt.infeasibility_threshold);
    sol.iterations = ldp.iterations;
    sol.feasibility_certificate = ldp.certificate;
    if (!ldp.feasible) {
        sol.status = SolveStatus::infeasible;
        sol.coefficients = Eigen::VectorXd::Zero(n);
        sol.witness_at_nodes = Eigen::VectorXd::Zero(n);
        return sol;
    }
    sol.status = SolveStatus::optimal;
    sol.coefficients = ldp.multipliers;
    sol.coefficients.tail(n - n1) *= -1.0;
    sol.witness_at_nodes = sigma.entries * sol.coefficients;
    sol.value = ldp.value;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = i < n1 ? 1.0 - sol.witness_at_nodes(i) : sol.witness_at_nodes(i) - problem.r;
        sol.max_violation = std::max(sol.max_violation, v);
    }
    return sol;
}

/// w_H(t) = E(X(t) H) = sum_i c_i R(t, t_i).
template <CovarianceFunction Cov>
double witness_eval(const Cov& cov, const PrimalSolution& solution, std::span<const double> t) {
    if (solution.status != SolveStatus::optimal) throw DomainError("witness_eval: solution is not optimal");
    double s = 0.0;
    for (std::size_t i = 0; i < solution.nodes.size(); ++i) {
        const double c = solution.coefficients(static_cast<Eigen::Index>(i));
        if (c != 0.0) s += c * cov(t, solution.nodes[i]);
    }
    return s;
}

/// A set of (K1, K2) pairs sharing the covariance and the depth r.
template <CovarianceFunction Cov>
struct PairCollection {
    Cov covariance;
    std::vector<std::pair<PointSet, PointSet>> pairs;
    double r = 1.0;

    HoleProblem<Cov> problem(std::size_t i) const { return {covariance, pairs.at(i).first, pairs.at(i).second, r}; }
};

struct CollectionResult {
    double value = std::numeric_limits<double>::infinity();
    std::size_t argmin = 0; ///< meaningful only when value is finite
    std::vector<PrimalSolution> solutions;
};

/// Minimum of solve_primal over the pairs; infeasible pairs count as +inf.
/// Ties go to the lowest index. Pair failures are rethrown with the index.
template <CovarianceFunction Cov>
CollectionResult rate_over_collection(const PairCollection<Cov>& collection, const PrimalOptions& opt = {}) {
    if (collection.pairs.empty()) throw DomainError("rate_over_collection: empty collection");
    CollectionResult out;
    out.solutions.resize(collection.pairs.size());
    parallel_for(collection.pairs.size(), [&](std::size_t i) {
        try {
            out.solutions[i] = solve_primal(collection.problem(i), opt);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("pair " + std::to_string(i) + ": " + e.what(), e.residual());
        } catch (const NumericalError& e) {
            throw NumericalError("pair " + std::to_string(i) + ": " + e.what());
        } catch (const DomainError& e) {
            throw DomainError("pair " + std::to_string(i) + ": " + e.what());
        }
    });
    for (std::size_t i = 0; i < out.solutions.size(); ++i)
        if (out.solutions[i].value < out.value) {
            out.value = out.solutions[i].value;
            out.argmin = i;
        }
    return out;
}

} // namespace ldhole
