#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/errors.hpp"
#include "ldhole/points.hpp"

namespace ldhole {

/// Anything that returns the covariance of the field at two points.
template <class C>
concept CovarianceFunction = requires(const C& c, std::span<const double> p) {
    { c(p, p) } -> std::convertible_to<double>;
};

enum class KernelFamily { squared_exponential, exponential, tabulated };

/// Stationary isotropic covariance R(|s - t|).
///
///   squared-exponential:  R(t) = variance * exp(-(scale * t)^2)
///   exponential:          R(t) = variance * exp(-scale * t)
///   tabulated:            monotone cubic (Fritsch-Carlson) interpolation of
///                         (distance, value) samples, held constant past the
///                         last sample
class IsotropicKernel {
public:
    static IsotropicKernel squared_exponential(double scale = 1.0, double variance = 1.0) {
        return IsotropicKernel(KernelFamily::squared_exponential, scale, variance);
    }

    static IsotropicKernel exponential(double scale = 1.0, double variance = 1.0) {
        return IsotropicKernel(KernelFamily::exponential, scale, variance);
    }

    /// Distances must start at 0 and increase strictly; values must be
    /// nonincreasing with a positive value at 0.
    static IsotropicKernel tabulated(std::vector<double> distances, std::vector<double> values) {
        if (distances.size() != values.size() || distances.size() < 2)
            throw DomainError("tabulated kernel: need at least two (distance, value) pairs");
        if (distances.front() != 0.0) throw DomainError("tabulated kernel: first distance must be 0");
        for (std::size_t i = 1; i < distances.size(); ++i) {
            if (!(distances[i] > distances[i - 1]))
                throw DomainError("tabulated kernel: distances must increase strictly");
            if (values[i] > values[i - 1])
                throw DomainError("tabulated kernel: values must be nonincreasing");
        }
        if (!(values.front() > 0.0)) throw DomainError("tabulated kernel: value at 0 must be positive");
        if (values.back() < 0.0) throw DomainError("tabulated kernel: values must be nonnegative");
        IsotropicKernel k(KernelFamily::tabulated, 1.0, values.front());
        k.table_x_ = std::move(distances);
        k.table_y_ = std::move(values);
        k.build_slopes();
        return k;
    }

    KernelFamily family() const noexcept { return family_; }
    double scale() const noexcept { return scale_; }
    double variance() const noexcept { return variance_; }

    /// Kernels of all three families are nonincreasing in the distance.
    bool is_monotone() const noexcept { return true; }

    /// R(t) -> 0 as t -> infinity.
    bool vanishes_at_infinity() const noexcept {
        return family_ != KernelFamily::tabulated || table_y_.back() <= 1e-3 * variance_;
    }

    std::string name() const {
        switch (family_) {
        case KernelFamily::squared_exponential: return "squared-exponential";
        case KernelFamily::exponential: return "exponential";
        case KernelFamily::tabulated: return "tabulated";
        }
        return "unknown";
    }

    double eval(double distance) const {
        if (distance < 0.0 || std::isnan(distance))
            throw DomainError("eval_kernel: negative distance " + std::to_string(distance));
        return eval_unchecked(distance);
    }

    double operator()(std::span<const double> s, std::span<const double> t) const {
        return eval_unchecked(ldhole::distance(s, t));
    }

    double eval_unchecked(double t) const {
        switch (family_) {
        case KernelFamily::squared_exponential: {
            const double x = scale_ * t;
            return variance_ * std::exp(-x * x);
        }
        case KernelFamily::exponential: return variance_ * std::exp(-scale_ * t);
        case KernelFamily::tabulated: return interpolate(t);
        }
        return 0.0;
    }

    /// Same kernel with variance multiplied by `factor`.
    IsotropicKernel scaled_variance(double factor) const {
        if (!(factor > 0.0)) throw DomainError("scaled_variance: factor must be positive");
        IsotropicKernel k = *this;
        k.variance_ *= factor;
        for (double& y : k.table_y_) y *= factor;
        for (double& m : k.slopes_) m *= factor;
        return k;
    }

private:
    IsotropicKernel(KernelFamily family, double scale, double variance)
        : family_(family), scale_(scale), variance_(variance) {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("kernel scale must be positive");
        if (!(variance > 0.0) || !std::isfinite(variance)) throw DomainError("kernel variance must be positive");
    }

    void build_slopes() {
        const std::size_t n = table_x_.size();
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = table_x_[i + 1] - table_x_[i];
            delta[i] = (table_y_[i + 1] - table_y_[i]) / h[i];
        }
        slopes_.assign(n, 0.0);
        slopes_[0] = delta[0];
        slopes_[n - 1] = delta[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] * delta[i] <= 0.0) {
                slopes_[i] = 0.0;
            } else {
                // weighted harmonic mean keeps the interpolant monotone
                const double w1 = 2.0 * h[i] + h[i - 1];
                const double w2 = h[i] + 2.0 * h[i - 1];
                slopes_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
    }

    double interpolate(double t) const {
        if (t >= table_x_.back()) return table_y_.back();
        const auto it = std::upper_bound(table_x_.begin(), table_x_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - table_x_.begin()) - 1;
        const double h = table_x_[i + 1] - table_x_[i];
        const double s = (t - table_x_[i]) / h;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * table_y_[i] + (s3 - 2 * s2 + s) * h * slopes_[i] +
               (-2 * s3 + 3 * s2) * table_y_[i + 1] + (s3 - s2) * h * slopes_[i + 1];
    }

    KernelFamily family_;
    double scale_;
    double variance_;
    std::vector<double> table_x_, table_y_, slopes_;
};

/// Covariance given explicitly on a finite index set. Points are
/// one-dimensional and carry the node index as their coordinate.
class MatrixCovariance {
public:
    explicit MatrixCovariance(Eigen::MatrixXd m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() == 0)
            throw DomainError("covariance matrix must be square and nonempty");
        if (!m_.allFinite()) throw DomainError("covariance matrix has non-finite entries");
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m_.cwiseAbs().maxCoeff()))
            throw DomainError("covariance matrix is not symmetric");
    }

    double operator()(std::span<const double> s, std::span<const double> t) const {
        return m_(index(s), index(t));
    }

    Eigen::Index nodes() const noexcept { return m_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return m_; }

    /// Point set holding the given node indices.
    PointSet points(std::initializer_list<int> indices) const {
        PointSet p(1);
        for (int i : indices) p.push_back({static_cast<double>(i)});
        for (std::size_t k = 0; k < p.size(); ++k) index(p[k]);
        return p;
    }

private:
    Eigen::Index index(std::span<const double> p) const {
        const double x = p[0];
        const auto i = static_cast<Eigen::Index>(std::llround(x));
        if (p.size() != 1 || static_cast<double>(i) != x || i < 0 || i >= m_.rows())
            throw DomainError("MatrixCovariance: point is not a valid node index");
        return i;
    }

    Eigen::MatrixXd m_;
};

/// Relative eigenvalue tolerance for the PSD check.
inline constexpr double kPsdTolerance = 1e-10;

/// Symmetric covariance matrix over an ordered point set.
struct CovMatrix {
    PointSet points;
    Eigen::MatrixXd entries;
};

/// Smallest eigenvalue relative to the largest magnitude; >= -kPsdTolerance
/// means PSD within tolerance.
inline double relative_min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    return ev.minCoeff() / scale;
}

template <CovarianceFunction Cov>
Eigen::MatrixXd cross_covariance(const Cov& cov, const PointSet& a, const PointSet& b) {
    Eigen::MatrixXd m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = cov(a[i], b[j]);
    return m;
}

/// Gram matrix of `cov` over `points`; throws NumericalError if it is not
/// PSD within kPsdTolerance.
template <CovarianceFunction Cov>
CovMatrix gram(const Cov& cov, const PointSet& points, bool check_psd = true) {
    if (points.empty()) throw DomainError("gram: empty point set");
    const std::size_t n = points.size();
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = cov(points[i], points[i]);
        for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i) = cov(points[i], points[j]);
    }
    if (check_psd) {
        const double rel = relative_min_eigenvalue(m);
        if (rel < -kPsdTolerance)
            throw NumericalError("gram: matrix is not positive semidefinite (relative min eigenvalue " +
                                 std::to_string(rel) + ")");
    }
    return {points, std::move(m)};
}

/// Factor F with m ~= F F^T, keeping eigen-directions whose eigenvalue
/// exceeds `rel_tol` times the largest. Columns are ordered by decreasing
/// eigenvalue.
inline Eigen::MatrixXd spectral_factor(const Eigen::MatrixXd& m, double rel_tol = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("spectral_factor: eigen-decomposition failed");
    const auto& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0)) throw NumericalError("spectral_factor: matrix has no positive eigenvalue");
    if (ev.minCoeff() < -kPsdTolerance * top)
        throw NumericalError("spectral_factor: matrix is not positive semidefinite");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = ev.size() - 1; i >= 0; --i)
        if (ev(i) > rel_tol * top) keep.push_back(i);
    Eigen::MatrixXd f(m.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
        f.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) * std::sqrt(ev(keep[k]));
    return f;
}

/// Lower Cholesky factor, retrying with a diagonal jitter of
/// 1e-12 * max diagonal (growing tenfold up to 1e-6) when the plain
/// factorization fails.
inline Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& m) {
    const double diag = m.diagonal().cwiseAbs().maxCoeff();
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    for (double jitter = 1e-12; jitter <= 1e-6; jitter *= 10.0) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter * diag;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericalError("cholesky_with_jitter: factorization failed even with jitter");
}

} // namespace ldhole
