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
 * @file covariance.hpp
 * @brief Stationary covariance models r(tau) with r(0) = 1 and -r''(0) = 1,
 * together with checks of the analytic hypotheses the crossing-count
 * results rely on.
 *
 * Every model carries the Taylor coefficients d, e of
 * r(tau) = 1 - tau^2/2 + d tau^4 + e tau^6 + o(tau^6); they feed the
 * small-lag asymptotics in regression.hpp.
 */

#pragma once

#include "levelcross/detail/numeric.hpp"
#include "levelcross/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace levelcross {

enum class Family { gaussian, damped_cosine, cosine, custom };

inline std::string_view to_string(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::damped_cosine: return "damped_cosine";
        case Family::cosine: return "cosine";
        case Family::custom: return "custom";
    }
    return "custom";
}

/// r, r', r'' at one lag.
struct CovarianceValues {
    double r = 0.0;
    double r_dot = 0.0;
    double r_ddot = 0.0;
};

/// 1 - r, r', r'' in extended precision, for algebra that cancels to
/// high order at small lags.
struct ExtendedValues {
    long double one_minus_r = 0.0L;
    long double r_dot = 0.0L;
    long double r_ddot = 0.0L;
};

struct TaylorCoefficients {
    double d = 0.0;
    double e = 0.0;
};

/// Immutable covariance model. Evaluators are defined for tau >= 0 and
/// extended by parity. Copies share nothing mutable, so a model may be read
/// from any number of threads.
class CovarianceModel {
public:
    using Evaluator = std::function<CovarianceValues(double)>;
    using OneMinusR = std::function<double(double)>;
    using ExtendedEvaluator = std::function<ExtendedValues(long double)>;

    static constexpr double normalization_tolerance = 1e-12;

    /// r(tau) = exp(-tau^2 / 2).
    static CovarianceModel gaussian() {
        return CovarianceModel(
            Family::gaussian, "gaussian", {},
            [](double t) {
                const double g = std::exp(-0.5 * t * t);
                return CovarianceValues{g, -t * g, (t * t - 1.0) * g};
            },
            [](double t) { return -std::expm1(-0.5 * t * t); }, 1.0 / 8.0, -1.0 / 48.0,
            [](long double t) {
                const long double g = std::exp(-0.5L * t * t);
                return ExtendedValues{-std::expm1(-0.5L * t * t), -t * g, (t * t - 1.0L) * g};
            });
    }

    /// r(tau) = exp(-a tau^2) cos(omega tau), a = (1 - omega^2) / 2, so that
    /// -r''(0) = 1 for every omega in [0, 1).
    static CovarianceModel damped_cosine(double omega) {
        if (!(omega >= 0.0 && omega < 1.0))
            throw InvalidModelError("damped_cosine: omega must lie in [0, 1)");
        const double a = 0.5 * (1.0 - omega * omega);
        const double w2 = omega * omega;
        const double d = a * a / 2.0 + a * w2 / 2.0 + w2 * w2 / 24.0;
        const double e = -a * a * a / 6.0 - a * a * w2 / 4.0 - a * w2 * w2 / 24.0 - w2 * w2 * w2 / 720.0;
        return CovarianceModel(
            Family::damped_cosine, "damped_cosine", {omega},
            [a, omega](double t) {
                const double g = std::exp(-a * t * t);
                const double c = std::cos(omega * t);
                const double s = std::sin(omega * t);
                const double r_dot = g * (-2.0 * a * t * c - omega * s);
                const double r_ddot =
                    g * ((4.0 * a * a * t * t - 2.0 * a - omega * omega) * c + 4.0 * a * omega * t * s);
                return CovarianceValues{g * c, r_dot, r_ddot};
            },
            [a, omega](double t) {
                const double s = std::sin(0.5 * omega * t);
                return -std::expm1(-a * t * t) * std::cos(omega * t) + 2.0 * s * s;
            },
            d, e,
            [a, omega](long double t) {
                const long double al = a, w = omega;
                const long double g = std::exp(-al * t * t);
                const long double c = std::cos(w * t), s = std::sin(w * t), sh = std::sin(0.5L * w * t);
                return ExtendedValues{-std::expm1(-al * t * t) * c + 2.0L * sh * sh,
                                      g * (-2.0L * al * t * c - w * s),
                                      g * ((4.0L * al * al * t * t - 2.0L * al - w * w) * c + 4.0L * al * w * t * s)};
            });
    }

    /// r(tau) = cos(tau). Non-decaying; useful only as a negative control.
    static CovarianceModel cosine() {
        return CovarianceModel(
            Family::cosine, "cosine", {},
            [](double t) { return CovarianceValues{std::cos(t), -std::sin(t), -std::cos(t)}; },
            [](double t) {
                const double s = std::sin(0.5 * t);
                return 2.0 * s * s;
            },
            1.0 / 24.0, -1.0 / 720.0,
            [](long double t) {
                const long double s = std::sin(0.5L * t);
                return ExtendedValues{2.0L * s * s, -std::sin(t), -std::cos(t)};
            });
    }

    /// User-supplied analytic model. `one_minus_r` may be given when the
    /// caller can evaluate 1 - r(tau) without cancellation near 0.
    static CovarianceModel custom(std::string name, Evaluator eval, double d, double e,
                                  OneMinusR one_minus_r = {}) {
        if (!one_minus_r) one_minus_r = [eval](double t) { return 1.0 - eval(t).r; };
        return CovarianceModel(Family::custom, std::move(name), {}, std::move(eval),
                               std::move(one_minus_r), d, e);
    }

    /// Built-in family by name. `override_de` replaces the stored Taylor
    /// coefficients; taylor_coefficients() then cross-checks the override.
    static CovarianceModel from_family(std::string_view family, std::span<const double> params = {},
                                       std::optional<TaylorCoefficients> override_de = std::nullopt) {
        auto expect_params = [&](std::size_t n) {
            if (params.size() != n)
                throw InvalidModelError(std::string(family) + ": expected " + std::to_string(n) +
                                        " parameter(s), got " + std::to_string(params.size()));
        };
        CovarianceModel m = [&] {
            if (family == "gaussian") {
                expect_params(0);
                return gaussian();
            }
            if (family == "damped_cosine") {
                expect_params(1);
                return damped_cosine(params[0]);
            }
            if (family == "cosine") {
                expect_params(0);
                return cosine();
            }
            throw InvalidModelError("unknown covariance family '" + std::string(family) +
                                    "' (known: gaussian, damped_cosine, cosine)");
        }();
        if (override_de) {
            m.d_ = override_de->d;
            m.e_ = override_de->e;
        }
        return m;
    }

    Family family() const noexcept { return family_; }
    const std::string& name() const noexcept { return name_; }
    const std::vector<double>& params() const noexcept { return params_; }
    double d() const noexcept { return d_; }
    double e() const noexcept { return e_; }

    CovarianceValues evaluate(double tau) const {
        if (!std::isfinite(tau)) throw DomainError("covariance: lag must be finite");
        if (tau >= 0.0) return eval_(tau);
        CovarianceValues v = eval_(-tau);
        v.r_dot = -v.r_dot;
        return v;
    }
    double r(double tau) const { return evaluate(tau).r; }

    /// 1 - r(tau), accurate for small |tau| when the family provides it.
    double one_minus_r(double tau) const {
        if (!std::isfinite(tau)) throw DomainError("covariance: lag must be finite");
        return one_minus_r_(std::abs(tau));
    }

    /// Extended-precision values for tau >= 0; custom models without an
    /// extended evaluator fall back to double.
    ExtendedValues evaluate_extended(double tau) const {
        if (!std::isfinite(tau) || tau < 0.0) throw DomainError("covariance: lag must be finite and >= 0");
        if (ext_) return ext_(static_cast<long double>(tau));
        const CovarianceValues v = eval_(tau);
        return {one_minus_r_(tau), v.r_dot, v.r_ddot};
    }

private:
    CovarianceModel(Family f, std::string name, std::vector<double> params, Evaluator eval,
                    OneMinusR omr, double d, double e, ExtendedEvaluator ext = {})
        : family_(f), name_(std::move(name)), params_(std::move(params)), eval_(std::move(eval)),
          one_minus_r_(std::move(omr)), ext_(std::move(ext)), d_(d), e_(e) {
        const CovarianceValues at0 = eval_(0.0);
        if (!(std::abs(at0.r - 1.0) <= normalization_tolerance) ||
            !(std::abs(at0.r_ddot + 1.0) <= normalization_tolerance))
            throw InvalidModelError(name_ + ": model must satisfy r(0) = 1 and r''(0) = -1");
    }

    Family family_;
    std::string name_;
    std::vector<double> params_;
    Evaluator eval_;
    OneMinusR one_minus_r_;
    ExtendedEvaluator ext_;
    double d_;
    double e_;
};

inline CovarianceValues evaluate(const CovarianceModel& model, double tau) { return model.evaluate(tau); }

namespace detail {

/// theta(tau) = r(tau) - 1 + tau^2 / 2.
inline double theta(const CovarianceModel& m, double tau) { return 0.5 * tau * tau - m.one_minus_r(tau); }

inline TaylorCoefficients richardson_taylor(const CovarianceModel& m) {
    auto g = [&](double t) { return theta(m, t) / (t * t * t * t); };
    const double g1 = g(0.1), g2 = g(0.05), g3 = g(0.025);
    const double r1 = (4.0 * g2 - g1) / 3.0, r2 = (4.0 * g3 - g2) / 3.0;
    const double d = (16.0 * r2 - r1) / 15.0;

    auto h = [&](double t) {
        const double t2 = t * t;
        return (theta(m, t) - d * t2 * t2) / (t2 * t2 * t2);
    };
    const double h1 = h(0.2), h2 = h(0.1), h3 = h(0.05);
    const double s1 = (4.0 * h2 - h1) / 3.0, s2 = (4.0 * h3 - h2) / 3.0;
    return {d, (16.0 * s2 - s1) / 15.0};
}

}  // namespace detail

/// Stored (d, e), verified against a Richardson-extrapolated estimate from r
/// near the origin (relative agreement 1e-4) and against 24d - 1 >= 0.
inline TaylorCoefficients taylor_coefficients(const CovarianceModel& model) {
    const double d = model.d(), e = model.e();
    if (24.0 * d - 1.0 < -1e-12)
        throw InvalidModelError(model.name() + ": 24d - 1 = " + std::to_string(24.0 * d - 1.0) +
                                " < 0 is impossible for a valid covariance");
    const TaylorCoefficients est = detail::richardson_taylor(model);
    auto close = [](double stored, double estimated) {
        return std::abs(stored - estimated) <= 1e-4 * std::abs(stored) + 1e-9;
    };
    if (!close(d, est.d) || !close(e, est.e))
        throw InvalidModelError(model.name() + ": Taylor coefficients (d=" + std::to_string(d) +
                                ", e=" + std::to_string(e) + ") disagree with finite differences (d~" +
                                std::to_string(est.d) + ", e~" + std::to_string(est.e) + ")");
    return {d, e};
}

struct ConditionReport {
    double geman_integral = 0.0;       // int_0^delta theta'(t)/t^2 dt
    double berman_sup_tail = 0.0;      // sup |r(t) ln t| on the tail grid
    double integrability_value = 0.0;  // int_0^tau_max (|r|+|r'|+|r''|) dt
    bool tail_converged = false;
    bool normalization_ok = false;
};

namespace detail {

/// theta'(tau) / tau^2, with the series 4d tau + 6e tau^3 below 1e-4.
inline double geman_integrand(const CovarianceModel& m, double tau) {
    if (tau < 1e-4) return 4.0 * m.d() * tau + 6.0 * m.e() * tau * tau * tau;
    return (m.evaluate(tau).r_dot + tau) / (tau * tau);
}

}  // namespace detail

inline double geman_integral(const CovarianceModel& model, double delta, double* error = nullptr) {
    if (!(delta > 0.0)) throw DomainError("geman_integral: delta must be positive");
    auto q = detail::adaptive_gk([&](double t) { return detail::geman_integrand(model, t); }, 0.0, delta,
                                 1e-12);
    if (error) *error = q.error;
    return q.value;
}

/// Hypothesis audit for a model: Geman integral near 0, integrability of
/// |r| + |r'| + |r''|, and the Berman tail. The tail is the final tenth
/// [0.9 tau_max, tau_max]; tail_converged requires that slice to contribute
/// less than 1e-8 of the integrability value.
inline ConditionReport check_conditions(const CovarianceModel& model, double delta, double tau_max) {
    if (!(delta > 0.0 && delta < tau_max && std::isfinite(tau_max)))
        throw DomainError("check_conditions: requires 0 < delta < tau_max");

    ConditionReport rep;
    const CovarianceValues at0 = model.evaluate(0.0);
    rep.normalization_ok = std::abs(at0.r - 1.0) <= CovarianceModel::normalization_tolerance &&
                           std::abs(at0.r_ddot + 1.0) <= CovarianceModel::normalization_tolerance;

    double geman_err = 0.0;
    rep.geman_integral = geman_integral(model, delta, &geman_err);

    auto abs_sum = [&](double t) {
        const CovarianceValues v = model.evaluate(t);
        return std::abs(v.r) + std::abs(v.r_dot) + std::abs(v.r_ddot);
    };
    const double split = 0.9 * tau_max;
    detail::CompensatedSum head, head_err, tail, tail_err;
    auto integrate_panels = [&](double a, double b, detail::CompensatedSum& acc, detail::CompensatedSum& err) {
        const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.5)));
        const double w = (b - a) / panels;
        for (int i = 0; i < panels; ++i) {
            const double lo = a + i * w;
            const double hi = (i + 1 == panels) ? b : lo + w;
            auto q = detail::adaptive_gk(abs_sum, lo, hi, 1e-12);
            acc += q.value;
            err += q.error;
        }
    };
    integrate_panels(0.0, split, head, head_err);
    integrate_panels(split, tau_max, tail, tail_err);
    rep.integrability_value = head.value() + tail.value();

    constexpr int grid = 1000;
    double sup = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double t = split + (tau_max - split) * i / grid;
        if (t <= 0.0) continue;
        sup = std::max(sup, std::abs(model.r(t) * std::log(t)));
    }
    rep.berman_sup_tail = sup;

    const double total = rep.integrability_value;
    const double quad_err = head_err.value() + tail_err.value() + geman_err;
    const bool finite = std::isfinite(total) && std::isfinite(rep.geman_integral) && std::isfinite(sup);
    rep.tail_converged = finite && total > 0.0 && tail.value() < 1e-8 * total && quad_err <= 1e-6 * total;
    return rep;
}

}  // namespace levelcross
