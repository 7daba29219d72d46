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

#include "levelcross/detail/numeric.hpp"
#include "levelcross/errors.hpp"

#include <boost/math/distributions/poisson.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace levelcross {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

struct SampleMoments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double skewness = 0.0;  // m3 / m2^{3/2}
    double excess_kurtosis = 0.0;
};

/// P(K > lambda) for the limiting Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    if (lambda < 1.18) {
        // Jacobi-transformed series, fast for small lambda.
        const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double j = 2.0 * k - 1.0;
            s += std::exp(-j * j * c);
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

/// One-sample KS test against the standard normal, asymptotic p-value.
inline KsResult ks_test(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 50) throw DomainError("ks_test: need at least 50 samples");
    std::vector<double> x(samples.begin(), samples.end());
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("ks_test: samples must be finite");
    std::sort(x.begin(), x.end());
    const double dn = static_cast<double>(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = detail::normal_cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / dn - f, f - static_cast<double>(i) / dn});
    }
    return {d, kolmogorov_survival(std::sqrt(dn) * d)};
}

/// Total variation between the empirical law of a histogram (counts[k] =
/// number of samples equal to k) and Poisson(ell). The sum runs to the
/// larger of the 1e-9 upper Poisson quantile and the last occupied bin.
inline double tv_distance(std::span<const double> counts, double ell) {
    if (counts.empty()) throw DomainError("tv_distance: histogram must be nonempty");
    if (!(ell > 0.0) || !std::isfinite(ell)) throw DomainError("tv_distance: ell must be positive");
    const double total = detail::compensated_sum(counts);
    if (!(total > 0.0)) throw DomainError("tv_distance: histogram has no mass");

    const boost::math::poisson_distribution<double> law(ell);
    const auto kmax_law = static_cast<std::size_t>(boost::math::quantile(boost::math::complement(law, 1e-9)));
    const std::size_t kmax = std::max(kmax_law, counts.size() - 1);
    detail::CompensatedSum s;
    for (std::size_t k = 0; k <= kmax; ++k) {
        const double emp = k < counts.size() ? counts[k] / total : 0.0;
        s += std::abs(emp - boost::math::pdf(law, static_cast<double>(k)));
    }
    return 0.5 * s.value();
}

/// Histogram of non-negative integer samples.
inline std::vector<double> histogram(std::span<const std::int64_t> values) {
    std::vector<double> h;
    for (std::int64_t v : values) {
        if (v < 0) throw DomainError("histogram: negative value");
        if (static_cast<std::size_t>(v) >= h.size()) h.resize(static_cast<std::size_t>(v) + 1, 0.0);
        h[static_cast<std::size_t>(v)] += 1.0;
    }
    return h;
}

inline SampleMoments sample_moments(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw DomainError("sample_moments: need at least two samples");
    const double dn = static_cast<double>(n);
    const double mean = detail::compensated_sum(x) / dn;
    detail::CompensatedSum s2, s3, s4;
    for (double v : x) {
        const double d = v - mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    const double m2 = s2.value() / dn, m3 = s3.value() / dn, m4 = s4.value() / dn;
    SampleMoments m;
    m.mean = mean;
    m.variance = s2.value() / (dn - 1.0);
    m.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    m.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    return m;
}

inline double median(std::vector<double> x) {
    if (x.empty()) throw DomainError("median: empty sample");
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

}  // namespace levelcross
