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

#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levelcross/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace levelcross::detail {

/// Neumaier compensated accumulator. Summation order is the caller's, so
/// results are bit-stable as long as the order is fixed.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
};

/// Adaptive 15-point Gauss-Kronrod on [a, b].
template <class F>
QuadResult adaptive_gk(F&& f, double a, double b, double rel_tol, unsigned max_depth = 18) {
    QuadResult r;
    if (!(b > a)) return r;
    r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, max_depth, rel_tol, &r.error, &r.l1);
    return r;
}

/// Sum of adaptive integrals over consecutive panels [breaks[i], breaks[i+1]].
/// A non-adaptive first pass estimates the total L1 norm S; each panel is then
/// refined to the absolute target rel_tol * S, so panels whose contribution is
/// at the noise floor do not exhaust the depth budget. Panels run on up to
/// `workers` threads and are reduced in index order.
template <class F>
QuadResult integrate_panels(const F& f, const std::vector<double>& breaks, double rel_tol, unsigned max_depth,
                            unsigned workers) {
    const std::size_t panels = breaks.size() < 2 ? 0 : breaks.size() - 1;
    std::vector<QuadResult> first(panels), second(panels);
    parallel_for(
        panels, [&](std::size_t p) { first[p] = adaptive_gk(f, breaks[p], breaks[p + 1], rel_tol, 0); }, workers);
    CompensatedSum total_l1;
    for (const auto& r : first) total_l1 += r.l1;
    const double scale = total_l1.value();
    parallel_for(
        panels,
        [&](std::size_t p) {
            if (!(first[p].l1 > 0.0) || first[p].error <= rel_tol * scale / static_cast<double>(panels)) {
                second[p] = first[p];
                return;
            }
            const double tol = std::min(0.5, rel_tol * scale / first[p].l1);
            second[p] = adaptive_gk(f, breaks[p], breaks[p + 1], tol, max_depth);
        },
        workers);
    CompensatedSum v, e, l1;
    for (const auto& r : second) {
        v += r.value;
        e += r.error;
        l1 += r.l1;
    }
    return {v.value(), e.value(), l1.value()};
}

inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// E|X| for X ~ N(mu, s^2); s = 0 degenerates to |mu|.
inline double folded_normal_mean(double mu, double s) noexcept {
    if (!(s > 0.0)) return std::abs(mu);
    const double z = mu / s;
    constexpr double sqrt_2_over_pi = 0.7978845608028654;
    return s * sqrt_2_over_pi * std::exp(-0.5 * z * z) + mu * std::erf(z / std::numbers::sqrt2);
}

}  // namespace levelcross::detail
