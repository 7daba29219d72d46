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
 * @file gaussian_abs.hpp
 * @brief E prod_i |Y_i + m_i| for a Gaussian vector of dimension 2 or 3.
 *
 * After a pivoted Cholesky factorization Y = L Z the integrand is piecewise
 * smooth in each explicit coordinate, with kinks where a linear factor
 * changes sign. Each explicit coordinate is integrated by Gauss-Legendre on
 * [-z_cut, z_cut] split at those kinks. The last coordinate enters through
 * the folded normal mean, and in two dimensions the product of the two
 * linear factors is integrated in closed form so that only the smooth
 * remainder folded(mu, s) - |mu| goes through the rule.
 */

#pragma once

#include "levelcross/detail/numeric.hpp"
#include "levelcross/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

namespace levelcross {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// Golub-Welsch on the Legendre recurrence.
inline GaussRule make_legendre_rule(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double k = i;
        jacobi(i, i - 1) = jacobi(i - 1, i) = k / std::sqrt(4.0 * k * k - 1.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = 2.0 * v0 * v0;
    }
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

}  // namespace detail

/// Cached rule; safe to call concurrently.
inline const GaussRule& legendre_rule(int n) {
    if (n < 1 || n > 1024) throw DomainError("legendre_rule: node count must lie in [1, 1024]");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<const GaussRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<const GaussRule>(detail::make_legendre_rule(n));
    return *slot;
}

namespace detail {

/// Standard normal mass outside [-z_cut, z_cut] is 2.3e-19.
inline constexpr double z_cut = 9.0;

inline double std_normal_pdf(double z) noexcept {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

/// E f(Z) over [-z_cut, z_cut], with the interval split at the given breaks.
template <class F>
double piecewise_expectation(F&& f, std::array<double, 3> breaks, int count, const GaussRule& rule) {
    std::array<double, 5> edges{};
    int m = 0;
    edges[m++] = -z_cut;
    std::sort(breaks.begin(), breaks.begin() + count);
    for (int i = 0; i < count; ++i)
        if (breaks[i] > edges[m - 1] && breaks[i] < z_cut) edges[m++] = breaks[i];
    edges[m++] = z_cut;

    CompensatedSum acc;
    const auto n = rule.nodes.size();
    for (int p = 0; p + 1 < m; ++p) {
        const double half = 0.5 * (edges[p + 1] - edges[p]);
        const double mid = 0.5 * (edges[p + 1] + edges[p]);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = mid + half * rule.nodes[i];
            s += rule.weights[i] * f(z) * std_normal_pdf(z);
        }
        acc += half * s;
    }
    return acc.value();
}

/// E|a1 + b1 Z||a2 + b2 Z| in closed form.
inline double abs_linear_pair(double a1, double b1, double a2, double b2) {
    if (b1 == 0.0) return std::abs(a1) * folded_normal_mean(a2, std::abs(b2));
    if (b2 == 0.0) return std::abs(a2) * folded_normal_mean(a1, std::abs(b1));
    const double p = -a1 / b1, q = -a2 / b2;
    const double lo = std::min(p, q), hi = std::max(p, q);
    // Antiderivative of (z - p)(z - q) phi(z).
    auto H = [&](double z) {
        const double pdf = std_normal_pdf(z), cdf = normal_cdf(z);
        return cdf - z * pdf + (p + q) * pdf + p * q * cdf;
    };
    return std::abs(b1 * b2) * ((1.0 + p * q) - 2.0 * (H(hi) - H(lo)));
}

/// folded_normal_mean(mu, s) - |mu| >= 0; smooth on each side of mu = 0.
inline double folded_excess(double mu, double s) noexcept {
    if (!(s > 0.0)) return 0.0;
    const double x = std::abs(mu) / s;
    const double tail = 0.5 * std::erfc(x / std::numbers::sqrt2);
    return std::max(0.0, 2.0 * s * (std_normal_pdf(x) - x * tail));
}

/// E|m1 + l11 Z1||m2 + l21 Z1 + l22 Z2| for independent standard Z1, Z2.
inline double pair_abs(double m1, double l11, double m2, double l21, double l22, const GaussRule& rule) {
    const double base = abs_linear_pair(m1, l11, m2, l21);
    if (!(l22 > 0.0)) return base;
    std::array<double, 3> br{};
    int nb = 0;
    if (l11 != 0.0) br[nb++] = -m1 / l11;
    if (l21 != 0.0) br[nb++] = -m2 / l21;
    auto f = [&](double z) { return std::abs(m1 + l11 * z) * folded_excess(m2 + l21 * z, l22); };
    return base + piecewise_expectation(f, br, nb, rule);
}

/// Pivoted Cholesky of a PSD matrix of dimension <= 3: P cov P^T = L L^T
/// with perm[i] the original index of row i. Largest-pivot ordering keeps
/// |L(i, j)| <= L(j, j), so rank deficiency produces zero columns instead of
/// amplified noise. Pivots below -tol mean the input is not a covariance.
struct PivotedFactor {
    Eigen::Matrix3d l = Eigen::Matrix3d::Zero();
    std::array<int, 3> perm{0, 1, 2};
};

inline PivotedFactor psd_cholesky(const Eigen::MatrixXd& cov) {
    const auto n = static_cast<int>(cov.rows());
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(cov(i, i)));
    const double tol = 1e-10 * scale;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (!(std::abs(cov(i, j) - cov(j, i)) <= 1e-12 * std::max(scale, 1e-300)))
                throw DomainError("abs_product_expectation: covariance is not symmetric");

    PivotedFactor f;
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a.topLeftCorner(n, n) = cov;
    for (int j = 0; j < n; ++j) {
        int best = j;
        for (int i = j + 1; i < n; ++i)
            if (a(i, i) > a(best, best)) best = i;
        if (best != j) {
            a.row(j).swap(a.row(best));
            a.col(j).swap(a.col(best));
            f.l.row(j).swap(f.l.row(best));
            std::swap(f.perm[j], f.perm[best]);
        }
        const double pivot = a(j, j);
        if (!(pivot >= -tol)) throw DomainError("abs_product_expectation: covariance is not positive semi-definite");
        if (pivot <= 1e-300) break;
        const double ljj = std::sqrt(pivot);
        f.l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) f.l(i, j) = a(i, j) / ljj;
        for (int i = j + 1; i < n; ++i)
            for (int m = j + 1; m < n; ++m) a(i, m) -= f.l(i, j) * f.l(m, j);
    }
    return f;
}

/// Projection onto the PSD cone by eigenvalue clipping, for covariances
/// formed by cancellation.
inline Eigen::MatrixXd clip_to_psd(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// E prod_i |Y_i + m_i| for Y ~ N(0, cov), dimension 1 to 3, with `nodes`
/// Gauss-Legendre points per smooth piece of each explicit coordinate.
inline double abs_product_expectation_fixed(std::span<const double> means, const Eigen::MatrixXd& cov,
                                            int nodes) {
    const auto n = static_cast<Eigen::Index>(means.size());
    if (n < 1 || n > 3 || cov.rows() != n || cov.cols() != n)
        throw DomainError("abs_product_expectation: dimension must be 1, 2 or 3 and match the covariance");
    for (double m : means)
        if (!std::isfinite(m)) throw DomainError("abs_product_expectation: means must be finite");
    if (!cov.allFinite()) throw DomainError("abs_product_expectation: covariance must be finite");

    const detail::PivotedFactor f = detail::psd_cholesky(cov);
    const Eigen::Matrix3d& l = f.l;
    std::array<double, 3> m{};
    for (Eigen::Index i = 0; i < n; ++i) m[i] = means[f.perm[i]];
    if (n == 1) return detail::folded_normal_mean(m[0], l(0, 0));

    const GaussRule& rule = legendre_rule(nodes);
    if (n == 2) return detail::pair_abs(m[0], l(0, 0), m[1], l(1, 0), l(1, 1), rule);

    if (!(l(0, 0) > 0.0)) return std::abs(m[0] * m[1] * m[2]);
    std::array<double, 3> br{};
    int nb = 0;
    for (int i = 0; i < 3; ++i)
        if (l(i, 0) != 0.0) br[nb++] = -m[i] / l(i, 0);
    auto outer = [&](double z) {
        const double a1 = std::abs(m[0] + l(0, 0) * z);
        return a1 * detail::pair_abs(m[1] + l(1, 0) * z, l(1, 1), m[2] + l(2, 0) * z, l(2, 1), l(2, 2), rule);
    };
    return detail::piecewise_expectation(outer, br, nb, rule);
}

struct AbsExpectation {
    double value = 0.0;
    double error = 0.0;  // |value(2 nodes) - value(nodes)|
};

/// E prod_i |Y_i + m_i| for dimension 2 or 3, with the node-doubling
/// difference as error estimate.
inline AbsExpectation abs_product_expectation(std::span<const double> means, const Eigen::MatrixXd& cov,
                                              int nodes = 32) {
    if (cov.rows() < 2 || cov.rows() > 3)
        throw DomainError("abs_product_expectation: dimension must be 2 or 3");
    const double coarse = abs_product_expectation_fixed(means, cov, nodes);
    const double fine = abs_product_expectation_fixed(means, cov, 2 * nodes);
    return {coarse, std::abs(fine - coarse)};
}

}  // namespace levelcross
