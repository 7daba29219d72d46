/*
   Copyright 2026 The levelcross Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

/**
 * @file rice.hpp
 * @brief Factorial moments of the crossing count N(T, u) by Rice formulas.
 *
 * The second moment is handled through the normalized integrand
 *
 *   J(tau) = (T - tau)/T * ( E|Y1 + psi u||Y2 - psi u| e^{-v} / sqrt(1 - r^2)
 *                            - (2/pi) e^{-u^2/2} ),
 *   v = (u^2/2)(1 - r)/(1 + r),
 *
 * for which var N / E N = 1 + int_0^T J. Both terms of J are O(1) in u, so
 * the ratio is formed without subtracting lambda^2 from E N(N-1). On
 * [0, tau_min] the substitution in v gives the closed form 1 - e^{-v(tau_min)}
 * for the first term.
 */

#pragma once

#include "levelcross/covariance.hpp"
#include "levelcross/detail/numeric.hpp"
#include "levelcross/errors.hpp"
#include "levelcross/gaussian_abs.hpp"
#include "levelcross/parallel.hpp"
#include "levelcross/regression.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace levelcross {

struct QuadratureConfig {
    int hermite_nodes_2d = 32;
    int hermite_nodes_3d = 16;
    double tau_min = 1e-3;
    double diag_cutoff = 1e-12;
    double rel_tol = 1e-6;

    void validate() const {
        if (hermite_nodes_2d < 8 || hermite_nodes_3d < 8)
            throw ConfigurationError("quadrature: hermite node counts must be >= 8");
        if (hermite_nodes_2d > 256 || hermite_nodes_3d > 256)
            throw ConfigurationError("quadrature: hermite node counts must be <= 256");
        if (!(tau_min > 0.0) || !std::isfinite(tau_min))
            throw ConfigurationError("quadrature: tau_min must be positive");
        if (!(diag_cutoff >= 0.0) || !std::isfinite(diag_cutoff))
            throw ConfigurationError("quadrature: diag_cutoff must be non-negative");
        if (!(rel_tol > 0.0 && rel_tol <= 1e-2))
            throw ConfigurationError("quadrature: rel_tol must lie in (0, 1e-2]");
    }
    bool operator==(const QuadratureConfig&) const = default;
};

struct MomentEstimate {
    double value = 0.0;
    double error = 0.0;
};

struct MomentErrors {
    double lambda = 0.0;
    double second_factorial = 0.0;
    double variance = 0.0;
    double ratio = 0.0;
    double third_factorial = 0.0;
};

struct MomentReport {
    double T = 0.0;
    double u = 0.0;
    double C_u = 0.0;
    double lambda = 0.0;
    double second_factorial = 0.0;
    double variance = 0.0;
    double ratio = 0.0;
    std::optional<double> third_factorial;
    MomentErrors quad_error;
};

/// C(u) = exp(-u^2/2) / pi, expected crossings per unit time.
inline double crossing_intensity(double u) {
    if (!std::isfinite(u)) throw DomainError("crossing_intensity: level must be finite");
    return std::exp(-0.5 * u * u) / std::numbers::pi;
}

/// lambda(T, u) = T C(u). The model enters only through the normalization
/// r''(0) = -1 that every CovarianceModel satisfies.
inline double mean_crossings(const CovarianceModel& /*model*/, double T, double u) {
    if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("mean_crossings: T must be finite and >= 0");
    return T * crossing_intensity(u);
}

inline double log_mean_crossings(double T, double u) {
    return std::log(T) - 0.5 * u * u - std::log(std::numbers::pi);
}

namespace detail {

inline void check_horizon(double T, double u, const char* who) {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError(std::string(who) + ": T must be finite and > 0");
    if (!std::isfinite(u)) throw DomainError(std::string(who) + ": level must be finite");
}

/// E|Y1 + psi u||Y2 - psi u| e^{-v} / sqrt(1 - r^2) at lag tau.
inline double pair_core(const CovarianceModel& model, double tau, double u, int nodes) {
    const PairQuantities pq = pair_quantities(model, tau, u);
    const double a = model.one_minus_r(tau);
    Eigen::Matrix2d cov;
    cov << 1.0, pq.rho, pq.rho, 1.0;
    cov *= pq.var_y;
    const std::array<double, 2> means{pq.psi_u, -pq.psi_u};
    const double e2 = abs_product_expectation_fixed(means, clip_to_psd(cov), nodes);
    const double v = 0.5 * u * u * a / (2.0 - a);
    return e2 * std::exp(-v) / std::sqrt(a * (2.0 - a));
}

inline double pair_j(const CovarianceModel& model, double T, double u, double tau, int nodes) {
    constexpr double two_over_pi = 2.0 / std::numbers::pi;
    return (T - tau) / T * (pair_core(model, tau, u, nodes) - two_over_pi * std::exp(-0.5 * u * u));
}

/// Panel breakpoints on [lo, hi]: a few refinements near lo, unit steps up
/// to 64, doubling afterwards.
inline std::vector<double> panel_breaks(double lo, double hi) {
    std::vector<double> b{lo};
    auto push = [&](double x) {
        if (x > b.back() && x < hi) b.push_back(x);
    };
    for (double x : {0.01, 0.1, 0.5}) push(x);
    double x = 1.0;
    for (; x <= 64.0 && x < hi; x += 1.0) push(x);
    for (; x < hi; x *= 2.0) push(x);
    b.push_back(hi);
    return b;
}

inline void check_quadrature(const QuadResult& r, double rel_tol, const char* who) {
    const double scale = std::max(std::abs(r.l1), 1e-300);
    const double achieved = r.error / scale;
    if (!std::isfinite(r.value) || !(achieved <= 100.0 * rel_tol))
        throw QuadratureError(std::string(who) + ": adaptive quadrature did not reach tolerance", r.value,
                              achieved);
}

struct RatioIntegral {
    double value = 0.0;  // int_0^T J at the configured node count
    double error = 0.0;
};

inline RatioIntegral ratio_integral(const CovarianceModel& model, double T, double u, const QuadratureConfig& cfg) {
    cfg.validate();
    const double tmin = std::min(cfg.tau_min, T);
    const double e_half = std::exp(-0.5 * u * u);
    const double a0 = model.one_minus_r(tmin);
    const double v0 = 0.5 * u * u * a0 / (2.0 - a0);
    const double inner = -std::expm1(-v0) - 2.0 / std::numbers::pi * e_half * tmin * (1.0 - tmin / (2.0 * T));

    const std::vector<double> br = panel_breaks(tmin, T);
    const int n = cfg.hermite_nodes_2d;
    const QuadResult coarse = integrate_panels([&](double t) { return pair_j(model, T, u, t, n); }, br,
                                               cfg.rel_tol, 14, worker_count());
    check_quadrature(coarse, cfg.rel_tol, "second_factorial_moment");
    const QuadResult fine = integrate_panels([&](double t) { return pair_j(model, T, u, t, 2 * n); }, br,
                                             cfg.rel_tol, 14, worker_count());
    const double vc = coarse.value + inner;
    const double vf = fine.value + inner;
    // The closed form drops O(tau_min^3) terms; charge them to the error.
    const double inner_err = tmin * tmin * tmin * (1.0 + u * u * u * u);
    return {vc, coarse.error + std::abs(vf - vc) + inner_err};
}

}  // namespace detail

/// Raw Rice integrand for the pair (0, tau), without the (T - tau) weight:
/// E|Y1 + psi u||Y2 - psi u| (2 pi)^{-1} (1 - r^2)^{-1/2} e^{-u^2/(1 + r)}.
inline double pair_integrand(const CovarianceModel& model, double tau, double u, int nodes = 32) {
    const double log_c = -0.5 * u * u;
    return detail::pair_core(model, tau, u, nodes) * std::exp(log_c) / (2.0 * std::numbers::pi);
}

/// var N(T, u) / E N(T, u).
inline MomentEstimate variance_ratio(const CovarianceModel& model, double T, double u,
                                     const QuadratureConfig& cfg = {}) {
    detail::check_horizon(T, u, "variance_ratio");
    const detail::RatioIntegral ri = detail::ratio_integral(model, T, u, cfg);
    return {ri.value + 1.0, ri.error};
}

/// E N(N - 1) = lambda (lambda + int J), formed in log space.
inline MomentEstimate second_factorial_moment(const CovarianceModel& model, double T, double u,
                                              const QuadratureConfig& cfg = {}) {
    detail::check_horizon(T, u, "second_factorial_moment");
    const detail::RatioIntegral ri = detail::ratio_integral(model, T, u, cfg);
    const double lambda = mean_crossings(model, T, u);
    const double inner = ri.value + lambda;
    const double value = inner > 0.0 ? std::exp(log_mean_crossings(T, u) + std::log(inner)) : lambda * inner;
    return {value, lambda * ri.error};
}

namespace detail {

inline constexpr double log_two_pi = 1.8378770664093453;

inline constexpr double surrogate_min_lag = 1e-3;   // exact path used only above this lag
inline constexpr double surrogate_diag_scale = 0.1;  // reference size for the cubic regime
inline constexpr double surrogate_ref_lag = 2e-3;    // reference size for the linear regime

/// A(0, h, h + k) from the regression quantities: E|prod (Y_i + alpha_i u)|
/// times the Gaussian density of (X(0), X(h), X(h + k)) at (u, u, u).
inline double triple_density_exact(const CovarianceModel& model, double h, double k, double u, int nodes) {
    const TripleQuantities tq = triple_quantities(model, h, k, u, 0.0);
    const std::array<double, 3> means{tq.alpha[0] * u, tq.alpha[1] * u, tq.alpha[2] * u};
    const double e = abs_product_expectation_fixed(means, clip_to_psd(tq.residual_cov), nodes);
    return e * std::exp(-1.5 * log_two_pi - 0.5 * std::log(tq.det) - 0.5 * tq.exponent);
}

/// Leading-order replacement near the diagonals, where the regression
/// quantities cancel below working precision. A is symmetric in (h, k) by
/// time reversal, vanishes like h^3 when both lags shrink together and like
/// the smaller lag when only one does; the exact value at a reference point
/// is carried along those scalings.
inline double triple_surrogate(const CovarianceModel& model, double h, double k, double u, int nodes) {
    double a = std::min(h, k), b = std::max(h, k), scale = 1.0;
    if (b < surrogate_diag_scale) {
        const double lambda = surrogate_diag_scale / b;
        a *= lambda;
        b = surrogate_diag_scale;
        scale = 1.0 / (lambda * lambda * lambda);
    }
    if (a < surrogate_ref_lag) {
        scale *= a / surrogate_ref_lag;
        a = surrogate_ref_lag;
    }
    return scale * triple_density_exact(model, a, b, u, nodes);
}

inline double triple_density(const CovarianceModel& model, double h, double k, double u, int nodes,
                             double diag_cutoff, bool surrogate) {
    const double delta = det3_from_gaps(model.one_minus_r(h), model.one_minus_r(k), model.one_minus_r(h + k));
    if (std::min(h, k) >= surrogate_min_lag && delta >= diag_cutoff && delta > 0.0)
        return triple_density_exact(model, h, k, u, nodes);
    return surrogate ? triple_surrogate(model, h, k, u, nodes) : 0.0;
}

/// Smallest h >= surrogate_min_lag on [0, h_max] where the exact path is
/// used at outer lag k; Delta grows with h near the diagonal.
inline double exact_region_start(const CovarianceModel& model, double k, double h_max, double diag_cutoff) {
    auto delta = [&](double h) {
        return det3_from_gaps(model.one_minus_r(h), model.one_minus_r(k), model.one_minus_r(h + k));
    };
    double lo = surrogate_min_lag;
    if (lo >= h_max) return h_max;
    if (delta(lo) >= diag_cutoff) return lo;
    double hi = std::min(h_max, 1.0);
    if (delta(hi) < diag_cutoff) return hi;
    for (int it = 0; it < 80 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (delta(mid) >= diag_cutoff ? hi : lo) = mid;
    }
    return hi;
}

/// The 16-node expectation carries ~1e-6 relative jitter as kinks cross the
/// truncation points, so the nested rule is not asked for more than this.
inline constexpr double triple_tol_floor = 1e-5;

struct TripleParts {
    QuadResult total;
    double surrogate_mass = 0.0;
};

/// 6 int int (R - h - k) A(0, h, h + k) over the simplex, outer in k. The
/// inner range is split where the surrogate hands over to the exact path.
inline TripleParts triple_integral(const CovarianceModel& model, double R, double u, const QuadratureConfig& cfg,
                                   int nodes, bool want_surrogate_mass) {
    const double tol = std::max(cfg.rel_tol, triple_tol_floor);
    auto weight = [R](double h, double k) { return 6.0 * (R - h - k); };
    auto exact = [&](double h, double k) { return weight(h, k) * triple_density_exact(model, h, k, u, nodes); };
    auto approx = [&](double h, double k) { return weight(h, k) * triple_surrogate(model, h, k, u, nodes); };

    auto surrogate_part = [&](double k, double t) {
        const double h_max = R - k;
        const double hc = k < surrogate_min_lag ? h_max : exact_region_start(model, k, h_max, cfg.diag_cutoff);
        return adaptive_gk([&](double h) { return approx(h, k); }, 0.0, hc, t, 10).value;
    };
    auto exact_part = [&](double k) {
        const double h_max = R - k;
        if (k < surrogate_min_lag) return 0.0;
        const double hc = exact_region_start(model, k, h_max, cfg.diag_cutoff);
        return adaptive_gk([&](double h) { return exact(h, k); }, hc, h_max, tol, 10).value;
    };

    std::vector<double> br = panel_breaks(0.0, R);
    br.insert(br.begin() + 1, surrogate_min_lag);
    TripleParts out;
    out.total = integrate_panels([&](double k) { return surrogate_part(k, tol) + exact_part(k); }, br, tol, 10,
                                 worker_count());
    check_quadrature(out.total, tol, "third_factorial_moment");
    // The mass only enters the error budget, so two digits suffice.
    if (want_surrogate_mass)
        out.surrogate_mass =
            integrate_panels([&](double k) { return surrogate_part(k, 1e-2); }, br, 1e-2, 6, worker_count()).value;
    return out;
}

}  // namespace detail

/// E N(N - 1)(N - 2) over [0, R]. The error combines the outer adaptive
/// estimate, the inner tolerance, node doubling and the full mass assigned
/// by the near-diagonal surrogate.
inline MomentEstimate third_factorial_moment(const CovarianceModel& model, double R, double u,
                                             const QuadratureConfig& cfg = {}) {
    detail::check_horizon(R, u, "third_factorial_moment");
    cfg.validate();
    const int n = cfg.hermite_nodes_3d;
    const detail::TripleParts base = detail::triple_integral(model, R, u, cfg, n, true);
    const detail::TripleParts fine = detail::triple_integral(model, R, u, cfg, 2 * n, false);
    const double tol = std::max(cfg.rel_tol, detail::triple_tol_floor);
    const double err = base.total.error + tol * std::abs(base.total.l1) +
                       std::abs(fine.total.value - base.total.value) + std::abs(base.surrogate_mass);
    return {base.total.value, err};
}

inline MomentReport moment_report(const CovarianceModel& model, double T, double u, const QuadratureConfig& cfg = {},
                                  bool third = false) {
    detail::check_horizon(T, u, "moment_report");
    const detail::RatioIntegral ri = detail::ratio_integral(model, T, u, cfg);
    MomentReport rep;
    rep.T = T;
    rep.u = u;
    rep.C_u = crossing_intensity(u);
    rep.lambda = mean_crossings(model, T, u);
    rep.ratio = ri.value + 1.0;
    rep.variance = rep.lambda * rep.ratio;
    const double inner = ri.value + rep.lambda;
    rep.second_factorial =
        inner > 0.0 ? std::exp(log_mean_crossings(T, u) + std::log(inner)) : rep.lambda * inner;
    rep.quad_error.ratio = ri.error;
    rep.quad_error.variance = rep.lambda * ri.error;
    rep.quad_error.second_factorial = rep.lambda * ri.error;
    if (third) {
        const MomentEstimate t3 = third_factorial_moment(model, T, u, cfg);
        rep.third_factorial = t3.value;
        rep.quad_error.third_factorial = t3.error;
    }
    return rep;
}

}  // namespace levelcross
