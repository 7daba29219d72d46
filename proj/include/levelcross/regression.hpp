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
 * @file regression.hpp
 * @brief Gaussian regression of the derivative vector on the process values.
 *
 * For times s_1 < ... < s_n, write X = (X(s_i)), Xd = (X'(s_i)). Then
 * Y = Xd - Psi X with Psi = Sigma10 Sigma^{-1} is independent of X, and
 * conditionally on X = (u, ..., u) the derivatives are distributed as
 * Y + Psi (u, ..., u). The residual covariance is Sigma_Y = Sigma11 - Psi Sigma10^T.
 *
 * Small-lag quantities are formed from A = 1 - r(h), B = 1 - r(k),
 * C = 1 - r(h+k) so that determinants of order h^2 k^2 (h+k)^2 survive in
 * double precision.
 */

#pragma once

#include "levelcross/covariance.hpp"
#include "levelcross/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace levelcross {

inline constexpr double default_degenerate_det = 1e-14;

struct RegressionSystem {
    std::vector<double> times;
    Eigen::MatrixXd sigma;    // var X
    Eigen::MatrixXd sigma10;  // cov(Xd, X)
    Eigen::MatrixXd sigma11;  // var Xd
    Eigen::MatrixXd psi;      // Sigma10 Sigma^{-1}
    Eigen::MatrixXd sigma_y;  // var Y
    double det = 0.0;         // det Sigma
};

namespace detail {

/// det of the 3x3 correlation matrix with off-diagonals 1-A, 1-B, 1-C.
inline double det3_from_gaps(double A, double B, double C) {
    return 2.0 * (A * B + B * C + C * A) - (A * A + B * B + C * C) - 2.0 * A * B * C;
}

}  // namespace detail

/// Regression system for n = 2 or 3 conditioning times. Sigma_Y is formed
/// both as Sigma11 - Psi Sigma10^T and as the Schur complement through the
/// Cholesky factor of Sigma; disagreement beyond 1e-10 is a numerical error.
inline RegressionSystem build_system(const CovarianceModel& model, std::span<const double> times,
                                     double degenerate_det = default_degenerate_det) {
    const auto n = static_cast<Eigen::Index>(times.size());
    if (n != 2 && n != 3) throw DomainError("build_system: need 2 or 3 conditioning times");
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(times[i + 1]) || times[i + 1] < times[i])
            throw DomainError("build_system: times must be finite and increasing");
    }

    RegressionSystem sys;
    sys.times.assign(times.begin(), times.end());
    sys.sigma.resize(n, n);
    sys.sigma10.resize(n, n);
    sys.sigma11.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const CovarianceValues v = model.evaluate(times[j] - times[i]);
            sys.sigma(i, j) = v.r;
            sys.sigma10(i, j) = -v.r_dot;
            sys.sigma11(i, j) = -v.r_ddot;
        }
    }

    if (n == 2) {
        const double a = model.one_minus_r(times[1] - times[0]);
        sys.det = a * (2.0 - a);
    } else {
        sys.det = detail::det3_from_gaps(model.one_minus_r(times[1] - times[0]),
                                         model.one_minus_r(times[2] - times[1]),
                                         model.one_minus_r(times[2] - times[0]));
    }
    if (!(sys.det >= degenerate_det))
        throw NearDegenerateError("build_system: det Sigma = " + std::to_string(sys.det) +
                                      " below the degeneracy cutoff",
                                  sys.det);

    Eigen::LLT<Eigen::MatrixXd> llt(sys.sigma);
    if (llt.info() != Eigen::Success)
        throw NearDegenerateError("build_system: Sigma not numerically positive definite", sys.det);

    sys.psi = llt.solve(sys.sigma10.transpose()).transpose();
    sys.sigma_y = sys.sigma11 - sys.psi * sys.sigma10.transpose();
    sys.sigma_y = 0.5 * (sys.sigma_y + sys.sigma_y.transpose()).eval();

    const Eigen::MatrixXd w = llt.matrixL().solve(sys.sigma10.transpose());
    const Eigen::MatrixXd schur = sys.sigma11 - w.transpose() * w;
    const double gap = (schur - sys.sigma_y).cwiseAbs().maxCoeff();
    if (!(gap <= 1e-10))
        throw NumericalError("build_system: residual covariance routes disagree by " + std::to_string(gap));
    return sys;
}

/// Two-point quantities at lag tau and level u.
struct PairQuantities {
    double rho = 0.0;    // corr(Y1, Y2)
    double psi_u = 0.0;  // conditional mean of X'(0) given X(0) = X(tau) = u
    double var_y = 1.0;  // var Y1 = var Y2
};

inline PairQuantities pair_quantities(const CovarianceModel& model, double tau, double u) {
    if (!(tau > 0.0)) throw DomainError("pair_quantities: lag must be positive");
    const CovarianceValues v = model.evaluate(tau);
    const double a = model.one_minus_r(tau);
    const double one_minus_r2 = a * (2.0 - a);
    const double den = one_minus_r2 - v.r_dot * v.r_dot;
    if (!(den > 0.0))
        throw DegenerateLagError("pair_quantities: 1 - r^2 - r'^2 <= 0 at tau = " + std::to_string(tau));
    PairQuantities q;
    q.var_y = den / one_minus_r2;
    q.rho = -(one_minus_r2 * v.r_ddot + v.r * v.r_dot * v.r_dot) / den;
    q.psi_u = v.r_dot / (2.0 - a) * u;
    return q;
}

/// Three-point quantities for times (0, h, h + k) at level u.
struct TripleQuantities {
    std::array<double, 3> alpha{};  // row sums of Psi
    std::array<double, 3> var_y{};
    double det = 0.0;               // det Sigma
    double exponent = 0.0;          // u Sigma^{-1} u^T with u = (u, u, u)
    Eigen::Matrix3d residual_cov = Eigen::Matrix3d::Zero();
};

inline TripleQuantities triple_quantities(const CovarianceModel& model, double h, double k, double u,
                                          double degenerate_det = default_degenerate_det) {
    if (!(h > 0.0 && k > 0.0)) throw DomainError("triple_quantities: lags must be positive");
    // The residual covariance is O(lag^4) but is assembled from terms of
    // order 1/lag^2, so the algebra runs in extended precision.
    using real = long double;
    using Mat3 = Eigen::Matrix<real, 3, 3>;
    using Vec3 = Eigen::Matrix<real, 3, 1>;
    const ExtendedValues vh = model.evaluate_extended(h), vk = model.evaluate_extended(k),
                         vhk = model.evaluate_extended(h + k);
    const real A = vh.one_minus_r, B = vk.one_minus_r, C = vhk.one_minus_r;
    const real dh = vh.r_dot, dk = vk.r_dot, dhk = vhk.r_dot;

    TripleQuantities q;
    const real det = 2 * (A * B + B * C + C * A) - (A * A + B * B + C * C) - 2 * A * B * C;
    q.det = static_cast<double>(det);
    if (!(q.det >= degenerate_det) || !(q.det > 0.0))
        throw NearDegenerateError("triple_quantities: det Sigma = " + std::to_string(q.det) +
                                      " below the degeneracy cutoff",
                                  q.det);

    // Row sums of Psi with the common factor det made explicit.
    const real s_ab = A + B - C, s_bc = B + C - A, s_ac = A + C - B;
    q.alpha[0] = static_cast<double>((-C * s_ab * dh - A * s_bc * dhk) / det);
    q.alpha[1] = static_cast<double>((B * s_ac * dh - A * s_bc * dk) / det);
    q.alpha[2] = static_cast<double>((B * s_ac * dhk + C * s_ab * dk) / det);

    // Adjugate of Sigma written in the gaps.
    Mat3 adj;
    adj(0, 0) = B * (2 - B);
    adj(1, 1) = C * (2 - C);
    adj(2, 2) = A * (2 - A);
    adj(0, 1) = adj(1, 0) = A - B - C + B * C;
    adj(0, 2) = adj(2, 0) = C - A - B + A * B;
    adj(1, 2) = adj(2, 1) = B - A - C + A * C;

    Mat3 s10;
    s10 << 0, -dh, -dhk,
           dh, 0, -dk,
           dhk, dk, 0;
    Mat3 s11;
    s11 << 1, -vh.r_ddot, -vhk.r_ddot,
           -vh.r_ddot, 1, -vk.r_ddot,
           -vhk.r_ddot, -vk.r_ddot, 1;
    Mat3 sy = s11 - s10 * adj * s10.transpose() / det;
    sy = (0.5L * (sy + sy.transpose())).eval();
    q.residual_cov = sy.cast<double>();
    for (int i = 0; i < 3; ++i) q.var_y[i] = q.residual_cov(i, i);

    Mat3 sigma;
    sigma << 1, 1 - A, 1 - C,
             1 - A, 1, 1 - B,
             1 - C, 1 - B, 1;
    const Eigen::LDLT<Mat3> ldlt(sigma);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NearDegenerateError("triple_quantities: Sigma not numerically positive definite", q.det);
    const Vec3 uu = Vec3::Constant(u);
    q.exponent = static_cast<double>(uu.dot(ldlt.solve(uu)));
    return q;
}

/// Leading-order small-lag predictions for the three-point system.
struct AsymptoticPrediction {
    double det = 0.0;
    std::array<double, 3> alpha{};
    std::array<double, 3> var_y{};
};

inline AsymptoticPrediction small_lag_asymptotics(double d, double e, double h, double k) {
    if (!(h > 0.0 && k > 0.0)) throw DomainError("small_lag_asymptotics: lags must be positive");
    const double g = 24.0 * d - 1.0;
    if (g < -1e-12) throw InvalidModelError("small_lag_asymptotics: 24d - 1 < 0");
    if (std::abs(g) <= 1e-12)
        throw BoundaryDegenerateError("small_lag_asymptotics: 24d - 1 = 0, leading terms undefined");

    AsymptoticPrediction p;
    const double hk = h + k;
    p.det = g / 4.0 * h * h * k * k * hk * hk;
    const double c = (8.0 * d * d + 10.0 * e) / g;
    p.alpha[0] = -c * h * hk * (2.0 * h + k);
    p.alpha[1] = c * h * k * (h - k);
    p.alpha[2] = c * k * hk * (2.0 * k + h);
    const double quad = h * h + h * k + k * k;
    p.var_y[0] = p.var_y[2] = 4.0 * (16.0 * d * d - d - 10.0 * e) / g * quad;
    p.var_y[1] = 4.0 * d * (16.0 * d - 1.0) / g * quad;
    return p;
}

}  // namespace levelcross
