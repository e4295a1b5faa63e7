#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/dual.hpp"
#include "ldhole/errors.hpp"
#include "ldhole/geometry.hpp"
#include "ldhole/isotropic.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/primal.hpp"

namespace ldhole {

/// Integrals of mu that enter the shape formulas for a hole point b.
struct HoleMoments {
    double energy = 0.0; ///< double integral of R against mu
    double at_b = 0.0;   ///< integral of R(., b) against mu
    double rbb = 0.0;    ///< R(b, b)
};

template <CovarianceFunction Cov>
HoleMoments hole_moments(const Cov& cov, const DiscreteMeasure& mu, std::span<const double> b) {
    return {double_integral(cov, mu, mu), potential(cov, mu, b), cov(b, b)};
}

inline double a_term(const HoleMoments& m, double r) {
    const double den = m.rbb * m.energy - m.at_b * m.at_b;
    if (!(den > 1e-14 * m.rbb * std::max(m.energy, 1e-300)))
        throw NumericalError("a_term: degenerate denominator (mu carries no information beyond X(b))");
    return (m.rbb - r * m.at_b) / den;
}

inline double b_term(const HoleMoments& m, double r) {
    const double den = r * m.at_b - m.rbb;
    if (den == 0.0) throw NumericalError("b_term: zero denominator");
    return (r * m.energy - m.at_b) / den;
}

template <CovarianceFunction Cov>
double a_term(const Cov& cov, const DiscreteMeasure& mu, std::span<const double> b, double r) {
    return a_term(hole_moments(cov, mu, b), r);
}

template <CovarianceFunction Cov>
double b_term(const Cov& cov, const DiscreteMeasure& mu, std::span<const double> b, double r) {
    return b_term(hole_moments(cov, mu, b), r);
}

enum class ShapeCase { first, second, generic };

inline const char* to_string(ShapeCase c) {
    switch (c) {
    case ShapeCase::first: return "first";
    case ShapeCase::second: return "second";
    default: return "generic";
    }
}

/// x(t) = sum_i c_i R(t, t_i). Immutable, so concurrent evaluation is safe.
template <CovarianceFunction Cov>
class ShapeFunction {
public:
    ShapeFunction(Cov cov, ShapeCase c, PointSet nodes, Eigen::VectorXd coefficients)
        : cov_(std::move(cov)), case_(c), nodes_(std::move(nodes)), coef_(std::move(coefficients)) {
        if (static_cast<std::size_t>(coef_.size()) != nodes_.size())
            throw DomainError("ShapeFunction: one coefficient per node required");
    }

    double operator()(std::span<const double> t) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const double c = coef_(static_cast<Eigen::Index>(i));
            if (c != 0.0) s += c * cov_(t, nodes_[i]);
        }
        return s;
    }

    /// Squared RKHS norm c^T Sigma c; equals the rate of the hole.
    double rkhs_norm2() const {
        const Eigen::MatrixXd g = gram(cov_, nodes_, false).entries;
        return coef_.dot(g * coef_);
    }

    ShapeCase shape_case() const noexcept { return case_; }
    const PointSet& nodes() const noexcept { return nodes_; }
    const Eigen::VectorXd& coefficients() const noexcept { return coef_; }

    bool tie = false;     ///< the two minima agreed within the tie tolerance
    double rate = 0.0;    ///< D_C(r)
    double a = 0.0, b = 0.0; ///< a(mu), b(mu) in the second case

private:
    Cov cov_;
    ShapeCase case_;
    PointSet nodes_;
    Eigen::VectorXd coef_;
};

inline constexpr double kShapeTieTolerance = 1e-9;

/// First case: x = D_C * potential of mu. Second case:
/// x = a(mu) [potential of mu - b(mu) R(., b)].
template <CovarianceFunction Cov>
ShapeFunction<Cov> shape_from_measure(const Cov& cov, const DiscreteMeasure& mu, std::span<const double> b, double r,
                                      ShapeCase c) {
    const HoleMoments m = hole_moments(cov, mu, b);
    if (c == ShapeCase::first) {
        if (!(m.energy > 0.0)) throw NumericalError("shape: measure has zero energy");
        const double rate = 1.0 / m.energy;
        ShapeFunction<Cov> s(cov, c, mu.support(), rate * mu.weights());
        s.rate = rate;
        return s;
    }
    if (c != ShapeCase::second) throw DomainError("shape_from_measure: case must be first or second");
    const double at = a_term(m, r), bt = b_term(m, r);
    PointSet nodes = mu.support();
    nodes.push_back(b);
    Eigen::VectorXd coef(static_cast<Eigen::Index>(nodes.size()));
    coef.head(coef.size() - 1) = at * mu.weights();
    coef(coef.size() - 1) = -at * bt;
    ShapeFunction<Cov> s(cov, c, std::move(nodes), std::move(coef));
    s.a = at;
    s.b = bt;
    const AbValues v = ab_from_abc({m.energy, m.at_b, m.rbb}, r);
    s.rate = v.B / v.A;
    return s;
}

/// Limiting shape from a solved dual problem with K2 = {b}.
template <CovarianceFunction Cov>
ShapeFunction<Cov> limiting_shape(const Cov& cov, const DualResult& dual, std::span<const double> b, double r) {
    const bool tie = std::isfinite(dual.second_min) &&
                     std::abs(dual.first_min - dual.second_min) <= kShapeTieTolerance * dual.first_min;
    if (dual.governing == DualCase::first || tie || !dual.mu1) {
        auto s = shape_from_measure(cov, dual.mu_first, b, r, ShapeCase::first);
        s.tie = tie;
        return s;
    }
    return shape_from_measure(cov, *dual.mu1, b, r, ShapeCase::second);
}

template <CovarianceFunction Cov>
ShapeFunction<Cov> limiting_shape(const Cov& cov, const PointSet& k1, std::span<const double> b, double r,
                                  const DualOptions& opt = {}) {
    PointSet k2(k1.dim());
    k2.push_back(b);
    return limiting_shape(cov, dual_optimize(cov, k1, k2, r, opt), b, r);
}

/// Witness of a primal solution as a shape.
template <CovarianceFunction Cov>
ShapeFunction<Cov> generic_shape(const Cov& cov, const PrimalSolution& sol) {
    if (sol.status != SolveStatus::optimal) throw DomainError("generic_shape: primal solution is not optimal");
    ShapeFunction<Cov> s(cov, ShapeCase::generic, sol.nodes, sol.coefficients);
    s.rate = sol.value;
    return s;
}

/// Shape for a sphere of radius rho with the hole at its center. By
/// rotation invariance the uniform measure is optimal in both cases and
/// x depends on |t| only.
struct IsotropicShape {
    ShapeCase shape_case = ShapeCase::first;
    double rho = 0.0, r = 0.0;
    double rate = 0.0;
    double a = 0.0, b = 0.0;
    IsotropicHoleSpec spec;

    double operator()(double radius) const {
        const double pot = sphere_potential(spec.kernel, spec.d, rho, radius, spec.quadrature);
        if (shape_case == ShapeCase::first) return rate * pot;
        return a * (pot - b * spec.kernel.eval(radius));
    }
};

inline IsotropicShape isotropic_shape(const IsotropicHoleSpec& spec, double rho) {
    spec.validate();
    if (!(rho > 0.0)) throw DomainError("isotropic_shape: rho must be positive");
    IsotropicShape s;
    s.spec = spec;
    s.rho = rho;
    s.r = spec.r;
    const WValue w = W_rho(spec, rho);
    s.rate = 1.0 / w.value;
    if (w.first_branch) return s;
    s.shape_case = ShapeCase::second;
    const HoleMoments m{w.D, w.R, spec.R0()};
    s.a = a_term(m, spec.r);
    s.b = b_term(m, spec.r);
    return s;
}

} // namespace ldhole
