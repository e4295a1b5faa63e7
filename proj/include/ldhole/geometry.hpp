#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/errors.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/parallel.hpp"
#include "ldhole/points.hpp"

namespace ldhole {

/// Probability measure with finitely many atoms. Atoms with zero weight are
/// allowed, so a measure can live on a whole discretized set.
class DiscreteMeasure {
public:
    static constexpr double kSumTolerance = 1e-12;

    DiscreteMeasure() = default;

    DiscreteMeasure(PointSet support, Eigen::VectorXd weights)
        : support_(std::move(support)), weights_(std::move(weights)) {
        if (support_.empty()) throw DomainError("DiscreteMeasure: empty support");
        if (static_cast<std::size_t>(weights_.size()) != support_.size())
            throw DomainError("DiscreteMeasure: one weight per support point required");
        if ((weights_.array() < 0.0).any()) throw DomainError("DiscreteMeasure: negative weight");
        if (std::abs(weights_.sum() - 1.0) > kSumTolerance)
            throw DomainError("DiscreteMeasure: weights sum to " + std::to_string(weights_.sum()));
    }

    static DiscreteMeasure uniform(PointSet support) {
        const auto n = static_cast<Eigen::Index>(support.size());
        if (n == 0) throw DomainError("DiscreteMeasure: empty support");
        return {std::move(support), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
    }

    static DiscreteMeasure point_mass(PointSet support, std::size_t atom) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(support.size()));
        if (atom >= support.size()) throw DomainError("DiscreteMeasure: atom index out of range");
        w(static_cast<Eigen::Index>(atom)) = 1.0;
        return {std::move(support), std::move(w)};
    }

    /// Normalizes nonnegative masses to a probability measure. Clips tiny
    /// negative round-off (> -1e-14 of the total) to zero.
    static DiscreteMeasure normalized(PointSet support, Eigen::VectorXd masses) {
        const double total = masses.sum();
        if (!(total > 0.0)) throw DomainError("DiscreteMeasure: total mass must be positive");
        for (Eigen::Index i = 0; i < masses.size(); ++i) {
            if (masses(i) < -1e-14 * total) throw DomainError("DiscreteMeasure: negative mass");
            masses(i) = std::max(masses(i), 0.0);
        }
        masses /= masses.sum();
        return {std::move(support), std::move(masses)};
    }

    const PointSet& support() const noexcept { return support_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return support_.size(); }
    int dim() const noexcept { return support_.dim(); }

private:
    PointSet support_;
    Eigen::VectorXd weights_;
};

/// Gauss-Legendre nodes and weights on [-1, 1]. Results are cached per n.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: need at least one node");
    static std::mutex mutex;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;

    std::vector<double> x(n), w(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double step = p1 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        // recompute the derivative at the converged node
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n == 1 ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

/// n-point Gauss-Legendre rule for the integral of f over [lo, hi].
template <class F>
double integrate_gl(F&& f, double lo, double hi, int n) {
    const auto& [x, w] = gauss_legendre(n);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * f(mid + half * x[i]);
    return s * half;
}

/// Discretized rotation-invariant probability measure on the sphere of
/// radius `radius` around `center` (origin when empty).
struct SphereGrid {
    int dim;
    double radius;
    int resolution;
    DiscreteMeasure measure;
};

inline constexpr int kDefaultResolution2d = 512;
inline constexpr int kDefaultResolution3d = 32;

/// d=1: the two atoms {-rho, +rho}. d=2: n equally spaced angles starting
/// at 0. d=3: n Gauss-Legendre nodes in cos(polar angle) times 2n uniform
/// azimuths.
inline SphereGrid sphere_grid(int d, double rho, int n, std::span<const double> center = {}) {
    if (d < 1 || d > 3) throw DomainError("sphere_grid: dimension must be 1, 2 or 3");
    if (n < 1) throw DomainError("sphere_grid: resolution must be positive");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw DomainError("sphere_grid: radius must be nonnegative");
    if (!center.empty() && static_cast<int>(center.size()) != d)
        throw DomainError("sphere_grid: center dimension mismatch");
    auto c = [&](int k) { return center.empty() ? 0.0 : center[k]; };

    PointSet pts(d);
    std::vector<double> w;
    if (d == 1) {
        pts.push_back({c(0) - rho});
        pts.push_back({c(0) + rho});
        w = {0.5, 0.5};
    } else if (d == 2) {
        for (int k = 0; k < n; ++k) {
            const double th = 2.0 * std::numbers::pi * k / n;
            pts.push_back({c(0) + rho * std::cos(th), c(1) + rho * std::sin(th)});
            w.push_back(1.0 / n);
        }
    } else {
        const auto& [x, gw] = gauss_legendre(n);
        const int m = 2 * n;
        for (int i = 0; i < n; ++i) {
            const double s = std::sqrt(std::max(0.0, 1.0 - x[i] * x[i]));
            for (int k = 0; k < m; ++k) {
                const double ph = 2.0 * std::numbers::pi * k / m;
                pts.push_back({c(0) + rho * s * std::cos(ph), c(1) + rho * s * std::sin(ph), c(2) + rho * x[i]});
                w.push_back(0.5 * gw[i] / m);
            }
        }
    }
    Eigen::VectorXd wv = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    wv /= wv.sum();
    return {d, rho, n, DiscreteMeasure(std::move(pts), std::move(wv))};
}

/// Sum over atoms of w_i v_j R(s_i, t_j). Rows are evaluated in parallel and
/// combined in index order.
template <CovarianceFunction Cov>
double double_integral(const Cov& cov, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim()) throw DomainError("double_integral: dimension mismatch");
    const auto& p = mu.support();
    const auto& q = nu.support();
    std::vector<double> rows(mu.size(), 0.0);
    parallel_for(mu.size(), [&](std::size_t i) {
        const double wi = mu.weights()(static_cast<Eigen::Index>(i));
        if (wi == 0.0) return;
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double vj = nu.weights()(static_cast<Eigen::Index>(j));
            if (vj != 0.0) s += vj * cov(p[i], q[j]);
        }
        rows[i] = wi * s;
    });
    double total = 0.0;
    for (double r : rows) total += r;
    return total;
}

/// Potential of the measure: m(t) = sum_i w_i R(s_i, t).
template <CovarianceFunction Cov>
double potential(const Cov& cov, const DiscreteMeasure& mu, std::span<const double> t) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double wi = mu.weights()(static_cast<Eigen::Index>(i));
        if (wi != 0.0) s += wi * cov(mu.support()[i], t);
    }
    return s;
}

/// Integral of R(|rho u - s e1|) against the uniform measure on the unit
/// sphere u in S^{d-1}: the potential of the radius-rho sphere at a point at
/// distance s >= 0 from its center. One-dimensional Gauss-Legendre in a
/// variable where the integrand is smooth.
inline double sphere_potential(const IsotropicKernel& k, int d, double rho, double s, int n = 512) {
    if (!(rho >= 0.0) || !(s >= 0.0)) throw DomainError("sphere_potential: negative radius or offset");
    if (d == 1) return 0.5 * (k.eval(std::abs(rho - s)) + k.eval(rho + s));
    if (rho == 0.0 || s == 0.0) return k.eval(std::max(rho, s));
    if (d == 2) {
        // angle between u and e1, uniform on [0, pi]
        auto f = [&](double th) {
            const double l2 = rho * rho + s * s - 2.0 * rho * s * std::cos(th);
            return k.eval_unchecked(std::sqrt(std::max(l2, 0.0)));
        };
        return integrate_gl(f, 0.0, std::numbers::pi, n) / std::numbers::pi;
    }
    if (d == 3) {
        // Archimedes: the distance l has density l / (2 rho s) on [|rho-s|, rho+s]
        auto f = [&](double l) { return k.eval_unchecked(l) * l; };
        return integrate_gl(f, std::abs(rho - s), rho + s, n) / (2.0 * rho * s);
    }
    throw DomainError("sphere_potential: dimension must be 1, 2 or 3");
}

/// D(rho): kernel energy of the rotation-invariant measure on the sphere of
/// radius rho. By invariance one point may be fixed, leaving a 1-d integral.
inline double sphere_energy(const IsotropicKernel& k, int d, double rho, int n = 512) {
    if (d < 1 || d > 3) throw DomainError("sphere_energy: dimension must be 1, 2 or 3");
    return sphere_potential(k, d, rho, rho, n);
}

namespace detail {

/// Extrapolates s_k = I + sum_j c_j h_k^{e_j} with h_k = 2^{-k}.
inline double richardson(const std::vector<double>& s, const std::vector<double>& exponents) {
    const auto m = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double h = std::ldexp(1.0, -static_cast<int>(k));
        a(k, 0) = 1.0;
        for (Eigen::Index j = 1; j < m; ++j) a(k, j) = std::pow(h, exponents[static_cast<std::size_t>(j - 1)]);
        rhs(k) = s[static_cast<std::size_t>(k)];
    }
    return a.colPivHouseholderQr().solve(rhs)(0);
}

} // namespace detail

/// I(d; eps): mean of |t1 - t2|^{-(d-1)+eps} over independent uniform
/// points on the unit sphere S^{d-1}, d in {2, 3}.
///
/// The coincident node is left out of the quadrature and the singular
/// error terms are removed by Richardson extrapolation over n, 2n, 4n, 8n.
/// d=2 fixes one point and sums over the other n-1 circle nodes; error terms
/// go as h^eps, h^{eps+2}, h^{eps+4}. d=3 uses the midpoint rule in
/// x = cos(angle) (equal-area bands); error terms go as h^{eps/2}, h^2, h^4.
inline double i_integral(int d, double eps, int n = 1024) {
    if (!(eps > 0.0)) throw DomainError("I_integral: eps must be positive, the integral diverges otherwise");
    if (d != 2 && d != 3) throw DomainError("I_integral: dimension must be 2 or 3");
    if (n < 8) throw DomainError("I_integral: resolution too small");
    const double p = -(d - 1) + eps;
    constexpr int levels = 4;
    std::vector<double> s;
    for (int lev = 0; lev < levels; ++lev) {
        const long m = static_cast<long>(n) << lev;
        double acc = 0.0;
        if (d == 2) {
            for (long j = 1; j < m; ++j)
                acc += std::pow(2.0 * std::sin(std::numbers::pi * static_cast<double>(j) / m), p);
            acc /= static_cast<double>(m);
        } else {
            const double h = 2.0 / static_cast<double>(m);
            for (long j = 0; j < m; ++j) {
                const double x = -1.0 + (static_cast<double>(j) + 0.5) * h;
                acc += std::pow(2.0 - 2.0 * x, 0.5 * p);
            }
            acc *= 0.5 * h;
        }
        s.push_back(acc);
    }
    std::vector<double> ex = d == 2 ? std::vector<double>{eps, eps + 2.0, eps + 4.0}
                                    : std::vector<double>{0.5 * eps, 2.0, 4.0};
    // coinciding exponents would make the system singular
    for (std::size_t i = 0; i < ex.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(ex[i] - ex[j]) < 1e-6) ex[i] += 1e-3;
    return detail::richardson(s, ex);
}

} // namespace ldhole
