#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldhole/errors.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/parallel.hpp"
#include "ldhole/primal.hpp"
#include "ldhole/rng.hpp"

namespace ldhole {

enum class McEstimator { crude, tilted };

inline const char* to_string(McEstimator e) { return e == McEstimator::crude ? "crude" : "tilted"; }

struct McConfig {
    std::uint64_t samples = 1'000'000; ///< per u
    std::vector<double> u_grid{3.0, 4.0, 5.0};
    std::uint64_t seed = 42;
    McEstimator estimator = McEstimator::tilted;

    void validate() const {
        if (samples < 1) throw DomainError("McConfig: sample count must be at least 1");
        if (u_grid.empty()) throw DomainError("McConfig: u grid is empty");
        for (std::size_t i = 0; i < u_grid.size(); ++i) {
            if (!(u_grid[i] > 0.0) || !std::isfinite(u_grid[i])) throw DomainError("McConfig: u values must be positive");
            if (i > 0 && !(u_grid[i] > u_grid[i - 1])) throw DomainError("McConfig: u grid must be increasing");
        }
    }
};

/// Samples are drawn in fixed chunks; each chunk's sums are merged in chunk
/// order, so the result does not depend on the thread count.
inline constexpr std::uint64_t kMcChunk = 4096;

/// Factor F with F F^T = cov (spectral, rank-revealing), so samples are F z.
inline Eigen::MatrixXd field_factor(const Eigen::MatrixXd& cov) {
    try {
        return spectral_factor(cov, 1e-13);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("sample_field: ") + e.what());
    }
}

namespace detail {
/// Columns [first, first + count) of the standard normal stream.
inline Eigen::MatrixXd normal_block(Eigen::Index rank, std::uint64_t seed, std::uint32_t stream, std::uint64_t first,
                                    std::uint64_t count) {
    Eigen::MatrixXd z(rank, static_cast<Eigen::Index>(count));
    for (std::uint64_t j = 0; j < count; ++j) {
        for (Eigen::Index k = 0; k < rank; k += 2) {
            const auto p = normal_pair(seed, stream, first + j, static_cast<std::uint32_t>(k / 2));
            z(k, static_cast<Eigen::Index>(j)) = p[0];
            if (k + 1 < rank) z(k + 1, static_cast<Eigen::Index>(j)) = p[1];
        }
    }
    return z;
}
} // namespace detail

/// n samples of N(0, cov), one per column.
inline Eigen::MatrixXd sample_field(const Eigen::MatrixXd& cov, std::uint64_t n, std::uint64_t seed) {
    const Eigen::MatrixXd f = field_factor(cov);
    return f * detail::normal_block(f.cols(), seed, 0, 0, n);
}

struct McPoint {
    double u = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    double ess = 0.0;   ///< (sum w)^2 / sum w^2 over hits
    std::uint64_t hits = 0;
    bool degenerate = false; ///< no hits, so no information at this u
};

enum class FitStatus { fitted, not_fitted };

struct RateFit {
    FitStatus status = FitStatus::not_fitted;
    double slope = 0.0;
    double intercept = 0.0;
    double ci_low = 0.0, ci_high = 0.0; ///< 95% from the per-point standard errors
    std::vector<double> deviation;      ///< log psi minus the fitted line, per resolved point
    std::size_t used = 0;
};

struct McEstimate {
    McEstimator estimator = McEstimator::tilted;
    std::vector<McPoint> points;
    RateFit fit;
    bool infeasible = false; ///< no feasible witness: the tilt falls back to crude
    double predicted_rate = std::numeric_limits<double>::infinity(); ///< D of the discretized problem
};

/// Weighted least squares of log psi against u^2/2. Weights come from the
/// delta-method variance (se/psi)^2; points with zero estimate are skipped.
inline RateFit fit_rate(const std::vector<McPoint>& pts) {
    RateFit out;
    std::vector<double> x, y, w;
    bool exact = true;
    for (const auto& p : pts) {
        if (p.degenerate || !(p.estimate > 0.0)) continue;
        x.push_back(0.5 * p.u * p.u);
        y.push_back(std::log(p.estimate));
        const double rel = p.std_error / p.estimate;
        if (rel > 0.0) exact = false;
        w.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 1.0);
    }
    out.used = x.size();
    if (x.size() < 3) return out;
    // rescale so exact inputs (zero se) give a plain least-squares fit
    const double wmax = *std::max_element(w.begin(), w.end());
    for (double& v : w) v /= wmax;
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) return out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    // weights are inverse variances up to the wmax rescaling
    const double se = exact ? 0.0 : 1.0 / std::sqrt(wmax * sxx);
    out.ci_low = out.slope - 1.96 * se;
    out.ci_high = out.slope + 1.96 * se;
    for (std::size_t i = 0; i < x.size(); ++i) out.deviation.push_back(y[i] - (out.intercept + out.slope * x[i]));
    out.status = FitStatus::fitted;
    return out;
}

/// Estimates P(X > u on K1, X < r u on K2) on the discretized sets. The
/// tilted estimator shifts the mean to u w_H, w_H = Sigma c the primal
/// witness, and reweights by exp(-u c^T X + u^2 c^T Sigma c / 2).
template <CovarianceFunction Cov>
McEstimate estimate_psi(const HoleProblem<Cov>& problem, const McConfig& config) {
    problem.validate();
    config.validate();
    const PointSet nodes = problem.nodes();
    const auto n1 = static_cast<Eigen::Index>(problem.k1.size());
    const Eigen::MatrixXd sigma = gram(problem.covariance, nodes).entries;
    const Eigen::MatrixXd f = field_factor(sigma);
    const Eigen::Index rank = f.cols();

    McEstimate est;
    est.estimator = config.estimator;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(sigma.rows());
    bool tilt = config.estimator == McEstimator::tilted;
    if (tilt) {
        const PrimalSolution sol = solve_primal(problem);
        if (sol.status != SolveStatus::optimal) {
            est.infeasible = true;
            tilt = false;
        } else {
            c = sol.coefficients;
            est.predicted_rate = sol.value;
        }
    }
    const Eigen::VectorXd shift_dir = sigma * c;
    const double quad = c.dot(shift_dir);

    const std::uint64_t chunks = (config.samples + kMcChunk - 1) / kMcChunk;
    for (std::size_t iu = 0; iu < config.u_grid.size(); ++iu) {
        const double u = config.u_grid[iu];
        const double ru = problem.r * u;
        struct Sums {
            double w = 0, w2 = 0;
            std::uint64_t hits = 0;
        };
        std::vector<Sums> part(chunks);
        parallel_for(chunks, [&](std::size_t k) {
            const std::uint64_t first = k * kMcChunk;
            const std::uint64_t count = std::min(kMcChunk, config.samples - first);
            Eigen::MatrixXd x = f * detail::normal_block(rank, config.seed, static_cast<std::uint32_t>(iu), first, count);
            if (tilt) x.colwise() += u * shift_dir;
            Sums s;
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                bool in = true;
                for (Eigen::Index i = 0; i < n1 && in; ++i) in = x(i, j) > u;
                for (Eigen::Index i = n1; i < x.rows() && in; ++i) in = x(i, j) < ru;
                if (!in) continue;
                const double wt = tilt ? std::exp(-u * c.dot(x.col(j)) + 0.5 * u * u * quad) : 1.0;
                s.w += wt;
                s.w2 += wt * wt;
                ++s.hits;
            }
            part[k] = s;
        });
        Sums tot;
        for (const auto& s : part) {
            tot.w += s.w;
            tot.w2 += s.w2;
            tot.hits += s.hits;
        }
        McPoint p;
        p.u = u;
        p.hits = tot.hits;
        const double n = static_cast<double>(config.samples);
        p.estimate = std::min(1.0, tot.w / n);
        const double var = std::max(0.0, tot.w2 / n - (tot.w / n) * (tot.w / n));
        p.std_error = config.samples > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        p.ess = tot.w2 > 0.0 ? tot.w * tot.w / tot.w2 : 0.0;
        p.degenerate = tot.hits == 0;
        est.points.push_back(p);
    }
    est.fit = fit_rate(est.points);
    return est;
}

} // namespace ldhole
