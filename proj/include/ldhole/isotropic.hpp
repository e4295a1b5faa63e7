#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ldhole/errors.hpp"
#include "ldhole/geometry.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/parallel.hpp"
#include "ldhole/primal.hpp"

namespace ldhole {

/// Spheres centered at the origin inside a domain whose largest inscribed
/// ball has radius rho_max.
struct IsotropicHoleSpec {
    IsotropicKernel kernel = IsotropicKernel::squared_exponential();
    int d = 2;
    double r = 0.5;
    double rho_max = 4.0;
    int rho_points = 400;           ///< log grid on [rho_min, rho_max]
    double rho_min = 1e-3;
    int b_points = 201;             ///< uniform grid on [0, 1]
    int quadrature = 512;           ///< Gauss-Legendre nodes for sphere integrals
    double refine_tolerance = 1e-6; ///< golden-section tolerance in rho

    void validate() const {
        if (d < 1 || d > 3) throw DomainError("isotropic: d must be 1, 2 or 3");
        if (!(r > 0.0 && r <= 1.0)) throw DomainError("isotropic: r must lie in (0, 1]");
        if (!(rho_max >= 0.0) || !std::isfinite(rho_max)) throw DomainError("isotropic: rho_max must be finite and >= 0");
        if (rho_points < 2 || b_points < 2 || quadrature < 2) throw DomainError("isotropic: grids need at least 2 points");
        if (!(rho_min > 0.0)) throw DomainError("isotropic: rho_min must be positive");
    }

    double R0() const { return kernel.eval(0.0); }
    double R(double rho) const { return kernel.eval(rho); }
    double D(double rho) const { return sphere_energy(kernel, d, rho, quadrature); }

    /// rho_max == 0 gives the single point {0}.
    std::vector<double> rho_grid() const {
        std::vector<double> g;
        if (rho_max <= 0.0) return {0.0};
        const double lo = std::min(rho_min, rho_max);
        for (int i = 0; i < rho_points; ++i)
            g.push_back(lo * std::pow(rho_max / lo, static_cast<double>(i) / (rho_points - 1)));
        g.back() = rho_max;
        return g;
    }

    std::vector<double> b_grid() const {
        std::vector<double> g(static_cast<std::size_t>(b_points));
        for (int i = 0; i < b_points; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (b_points - 1);
        return g;
    }
};

struct WValue {
    double value = 0.0;      ///< W_rho(r); the rate M_rho(r) is 1 / value
    bool first_branch = false; ///< R(rho) <= r D(rho)
    bool degenerate = false;   ///< H denominator vanished
    double D = 0.0, R = 0.0, H = 0.0;
};

namespace detail {

inline double h_formula(double r0, double d, double rr, double r, bool& degenerate) {
    const double den = r0 - 2.0 * r * rr + r * r * d;
    degenerate = !(den > 1e-15 * r0);
    if (degenerate) return 0.0;
    return std::max(r0 * d - rr * rr, 0.0) / den;
}

// Golden-section maximization of a unimodal f on [lo, hi].
template <class F>
double golden_max(F&& f, double lo, double hi, double tol) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Second-branch expression (R0 D - R^2) / (R0 - 2 r R + r^2 D), for any rho.
inline double H_rho(const IsotropicHoleSpec& s, double rho, bool* degenerate = nullptr) {
    if (rho < 0.0) throw DomainError("H_rho: rho must be >= 0");
    bool deg = false;
    const double h = detail::h_formula(s.R0(), s.D(rho), s.R(rho), s.r, deg);
    if (degenerate) *degenerate = deg;
    return h;
}

inline WValue W_rho(const IsotropicHoleSpec& s, double rho) {
    if (rho < 0.0) throw DomainError("W_rho: rho must be >= 0");
    WValue w;
    w.D = s.D(rho);
    w.R = s.R(rho);
    w.H = detail::h_formula(s.R0(), w.D, w.R, s.r, w.degenerate);
    w.first_branch = w.R <= s.r * w.D;
    w.value = w.first_branch ? w.D : w.H;
    return w;
}

struct RadiusProfile {
    std::vector<double> rho, R, D, H, W;
    std::vector<char> first_branch;
};

inline RadiusProfile radius_profile(const IsotropicHoleSpec& s, const std::vector<double>& rhos) {
    s.validate();
    RadiusProfile p;
    const std::size_t n = rhos.size();
    p.rho = rhos;
    p.R.resize(n);
    p.D.resize(n);
    p.H.resize(n);
    p.W.resize(n);
    p.first_branch.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const WValue w = W_rho(s, rhos[i]);
        p.R[i] = w.R;
        p.D[i] = w.D;
        p.H[i] = w.H;
        p.W[i] = w.value;
        p.first_branch[i] = w.first_branch;
    });
    return p;
}

struct MostLikelyRadius {
    double rho_star = 0.0;
    double h_max = 0.0;
    bool h_equals_w = false; ///< H(rho*) coincides with W_{rho*}(r)
};

/// argmax of H_rho(r) over (0, rho_max]: grid scan then golden section.
inline MostLikelyRadius most_likely_radius(const IsotropicHoleSpec& s) {
    s.validate();
    if (!s.kernel.is_monotone() || !s.kernel.vanishes_at_infinity())
        throw DomainError("most_likely_radius: kernel must be monotone and vanish at infinity");
    if (!(s.r < 1.0)) throw DomainError("most_likely_radius: r must be < 1");
    if (!(s.rho_max > 0.0)) throw DomainError("most_likely_radius: rho_max must be positive");
    const auto grid = s.rho_grid();
    std::vector<double> h(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { h[i] = H_rho(s, grid[i]); });
    const auto i = static_cast<std::size_t>(std::max_element(h.begin(), h.end()) - h.begin());
    const double lo = i == 0 ? 0.0 : grid[i - 1];
    const double hi = i + 1 == grid.size() ? grid[i] : grid[i + 1];
    MostLikelyRadius out;
    out.rho_star = detail::golden_max([&](double x) { return H_rho(s, x); }, lo, hi, s.refine_tolerance);
    out.h_max = H_rho(s, out.rho_star);
    if (h[i] > out.h_max) {
        out.rho_star = grid[i];
        out.h_max = h[i];
    }
    const WValue w = W_rho(s, out.rho_star);
    out.h_equals_w = std::abs(w.value - out.h_max) <= 1e-12 * std::max(out.h_max, 1e-300);
    return out;
}

struct CenterRate {
    double value = std::numeric_limits<double>::infinity(); ///< D_C = min M_rho(r)
    double rho_argmin = 0.0;
    double w_max = 0.0;
    bool degenerate = false; ///< every M_rho was infinite
};

/// min over 0 <= rho <= rho_max of 1 / W_rho(r).
inline CenterRate center_rate(const IsotropicHoleSpec& s) {
    s.validate();
    auto grid = s.rho_grid();
    if (grid.front() > 0.0) grid.insert(grid.begin(), 0.0);
    std::vector<double> w(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { w[i] = W_rho(s, grid[i]).value; });
    const auto i = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    CenterRate out;
    out.rho_argmin = grid[i];
    out.w_max = w[i];
    if (grid.size() > 1) {
        const double lo = i == 0 ? 0.0 : grid[i - 1];
        const double hi = i + 1 == grid.size() ? grid[i] : grid[i + 1];
        const double x = detail::golden_max([&](double t) { return W_rho(s, t).value; }, lo, hi, s.refine_tolerance);
        const double wx = W_rho(s, x).value;
        if (wx > out.w_max) {
            out.w_max = wx;
            out.rho_argmin = x;
        }
    }
    if (out.w_max > 0.0)
        out.value = 1.0 / out.w_max;
    else
        out.degenerate = true;
    return out;
}

struct VValue {
    double value = 0.0;
    bool degenerate = false; ///< zero denominator, value = +inf
};

namespace detail {

inline VValue v_ratio(double r0, double ii, double i1, double r) {
    VValue v;
    const double den = r0 - 2.0 * r * i1 + r * r * ii;
    if (!(den > 1e-15 * r0)) {
        v.value = std::numeric_limits<double>::infinity();
        v.degenerate = true;
        return v;
    }
    v.value = (ii - i1 * i1) / den;
    return v;
}

inline std::vector<double> hole_point(int d, double x) {
    std::vector<double> p(static_cast<std::size_t>(d), 0.0);
    p[0] = x;
    return p;
}

} // namespace detail

/// V(rho, b; mu) for mu on the unit sphere; distances are scaled by rho and
/// the hole sits at b rho e1.
inline VValue V_eval(const IsotropicHoleSpec& s, double rho, double b, const DiscreteMeasure& mu) {
    if (b < 0.0 || b > 1.0) throw DomainError("V_eval: b must lie in [0, 1]");
    if (rho < 0.0) throw DomainError("V_eval: rho must be >= 0");
    if (mu.dim() != s.d) throw DomainError("V_eval: measure dimension differs from spec");
    PointSet scaled(s.d);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        std::vector<double> p(mu.support()[i].begin(), mu.support()[i].end());
        for (double& x : p) x *= rho;
        scaled.push_back(p);
    }
    const DiscreteMeasure m(scaled, mu.weights());
    const double ii = double_integral(s.kernel, m, m);
    const double i1 = potential(s.kernel, m, detail::hole_point(s.d, b * rho));
    return detail::v_ratio(s.R0(), ii, i1, s.r);
}

/// g(b) = integral of R(rho |t - b e1|) against the uniform measure on the unit sphere.
inline double sphere_hole_potential(const IsotropicHoleSpec& s, double rho, double b) {
    return sphere_potential(s.kernel, s.d, rho, b * rho, s.quadrature);
}

/// True when g(b) is minimized at b = 0 on the b grid.
inline bool min_int_condition(const IsotropicHoleSpec& s, double rho) {
    const double g0 = sphere_hole_potential(s, rho, 0.0);
    double gmin = g0;
    for (double b : s.b_grid()) gmin = std::min(gmin, sphere_hole_potential(s, rho, b));
    return g0 <= gmin + 1e-9;
}

struct ThresholdResult {
    bool found = false;
    double rho = std::numeric_limits<double>::quiet_NaN();
};

/// Radius beyond which min_int_condition holds: the last failing grid
/// radius is bracketed against its successor and bisected.
inline ThresholdResult min_int_threshold(const IsotropicHoleSpec& s, int scan_points = 400) {
    s.validate();
    ThresholdResult out;
    if (!(s.rho_max > 0.0)) return out;
    std::vector<double> grid(static_cast<std::size_t>(scan_points));
    for (int i = 0; i < scan_points; ++i) grid[static_cast<std::size_t>(i)] = s.rho_max * (i + 1) / scan_points;
    std::vector<char> ok(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { ok[i] = min_int_condition(s, grid[i]); });
    std::size_t last_false = grid.size();
    for (std::size_t i = grid.size(); i-- > 0;)
        if (!ok[i]) {
            last_false = i;
            break;
        }
    if (last_false == grid.size() || last_false + 1 == grid.size()) return out;
    double lo = grid[last_false], hi = grid[last_false + 1];
    while (hi - lo > s.refine_tolerance) {
        const double mid = 0.5 * (lo + hi);
        (min_int_condition(s, mid) ? hi : lo) = mid;
    }
    out.found = true;
    out.rho = 0.5 * (lo + hi);
    return out;
}

struct MixtureResult {
    double w = 0.0;
    bool cond_ok = false;      ///< integral against the hole point >= r * energy
    bool dominance_ok = false; ///< V(rho, b; mu_w) <= V(rho, 0; mu_h)
    double v = 0.0, v_center = 0.0;
    DiscreteMeasure measure;   ///< mu_w on the unit sphere, atom at e1 first
};

/// mu_w = w delta_{e1} + (1 - w) mu_h with w minimizing the numerator of V.
/// All integrals are in closed form given D(rho) and g(b): the uniform
/// measure has potential D(rho) everywhere on its own sphere.
inline MixtureResult mixture_search(const IsotropicHoleSpec& s, double rho, double b, int measure_resolution = 0) {
    if (b < 0.0 || b > 1.0) throw DomainError("mixture_search: b must lie in [0, 1]");
    const double r0 = s.R0(), d = s.D(rho), rr = s.R(rho);
    const double g = sphere_hole_potential(s, rho, b);
    const double rb = s.R(rho * (1.0 - b));
    // N(w) = II(w) - I1(w)^2 with II = D + w^2 (R0 - D), I1 = g + w (rb - g)
    const double quad = (r0 - d) - (rb - g) * (rb - g);
    const double lin = -2.0 * g * (rb - g);
    double w;
    if (quad > 0.0)
        w = std::clamp(-lin / (2.0 * quad), 0.0, 1.0);
    else
        w = (quad + lin < 0.0) ? 1.0 : 0.0;
    MixtureResult out;
    out.w = w;
    const double ii = d + w * w * (r0 - d);
    const double i1 = g + w * (rb - g);
    out.cond_ok = i1 >= s.r * ii - 1e-12;
    out.v = detail::v_ratio(r0, ii, i1, s.r).value;
    out.v_center = detail::v_ratio(r0, d, rr, s.r).value;
    // both numerators cancel O(R0^2) terms, so compare above their round-off floor
    out.dominance_ok = out.v <= out.v_center * (1.0 + 1e-9) + 1e-13 * r0;

    const int n = measure_resolution > 0 ? measure_resolution
                                         : (s.d == 3 ? kDefaultResolution3d : s.d == 2 ? kDefaultResolution2d : 1);
    const auto grid = sphere_grid(s.d, 1.0, n);
    PointSet pts(s.d);
    pts.push_back(detail::hole_point(s.d, 1.0));
    for (std::size_t i = 0; i < grid.measure.size(); ++i) pts.push_back(grid.measure.support()[i]);
    Eigen::VectorXd wts(static_cast<Eigen::Index>(pts.size()));
    wts(0) = w;
    wts.tail(wts.size() - 1) = (1.0 - w) * grid.measure.weights();
    out.measure = DiscreteMeasure::normalized(std::move(pts), std::move(wts));
    return out;
}

struct AnywhereRate {
    double value = std::numeric_limits<double>::infinity();
    bool verified = false;
    double center_value = std::numeric_limits<double>::infinity();
    int relevant_radii = 0;  ///< grid radii with R(rho) >= r D(rho)
    int unverified_pairs = 0; ///< (rho, b) pairs where no certificate was found
};

struct AnywhereOptions {
    bool check_hypothesis = true;
    int fallback_rho_points = 24;
    int fallback_b_points = 11;
    int fallback_resolution = 0; ///< sphere nodes for the discretized fallback; 0 picks 64 (d=2) or 8 (d=3)
};

/// Rate of a hole anywhere inside a sphere. When the hypothesis of the
/// equivalence theorem is certified (min_int_condition or a good mixture
/// for every relevant radius and hole position), the center rate is exact.
/// Otherwise the minimum over a coarse (rho, b) grid of the discretized
/// primal rate is returned, unverified.
inline AnywhereRate anywhere_rate(const IsotropicHoleSpec& s, const AnywhereOptions& opt = {}) {
    s.validate();
    AnywhereRate out;
    const CenterRate cr = center_rate(s);
    out.center_value = cr.value;
    if (opt.check_hypothesis) {
        const auto grid = s.rho_grid();
        const auto bs = s.b_grid();
        std::vector<int> bad(grid.size(), 0), relevant(grid.size(), 0);
        parallel_for(grid.size(), [&](std::size_t i) {
            const double rho = grid[i];
            if (s.R(rho) < s.r * s.D(rho)) return;
            relevant[i] = 1;
            if (min_int_condition(s, rho)) return;
            for (double b : bs) {
                const MixtureResult m = mixture_search(s, rho, b, 1);
                if (!(m.cond_ok && m.dominance_ok)) ++bad[i];
            }
        });
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out.relevant_radii += relevant[i];
            out.unverified_pairs += bad[i];
        }
        if (out.unverified_pairs == 0) {
            out.verified = true;
            out.value = cr.value;
            return out;
        }
    }
    const int n = opt.fallback_resolution > 0 ? opt.fallback_resolution : (s.d == 3 ? 8 : s.d == 2 ? 64 : 1);
    const int nr = opt.fallback_rho_points, nb = opt.fallback_b_points;
    std::vector<double> vals(static_cast<std::size_t>(nr * nb), std::numeric_limits<double>::infinity());
    parallel_for(vals.size(), [&](std::size_t k) {
        const int i = static_cast<int>(k) / nb, j = static_cast<int>(k) % nb;
        const double rho = s.rho_max * (i + 1) / nr, b = static_cast<double>(j) / (nb - 1);
        const auto grid = sphere_grid(s.d, rho, n);
        PointSet k2(s.d);
        k2.push_back(detail::hole_point(s.d, b * rho));
        vals[k] = solve_primal(HoleProblem<IsotropicKernel>{s.kernel, grid.measure.support(), k2, s.r}).value;
    });
    out.value = std::min(*std::min_element(vals.begin(), vals.end()), cr.value);
    return out;
}

} // namespace ldhole
