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

#include "levelcross/rice.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace levelcross;

TEST(MeanCrossings, UnitIntervalAtZeroLevel) {
    EXPECT_NEAR(mean_crossings(CovarianceModel::gaussian(), 1.0, 0.0), 1.0 / std::numbers::pi, 1e-15);
    EXPECT_NEAR(mean_crossings(CovarianceModel::gaussian(), 1.0, 0.0), 0.3183099, 1e-7);
}

TEST(MeanCrossings, EmptyInterval) {
    for (double u : {-3.0, 0.0, 5.0}) EXPECT_EQ(mean_crossings(CovarianceModel::gaussian(), 0.0, u), 0.0);
}

TEST(MeanCrossings, ModerateLevel) {
    const double expect = 10.0 * std::exp(-2.0) / std::numbers::pi;
    EXPECT_NEAR(mean_crossings(CovarianceModel::gaussian(), 10.0, 2.0), expect, 1e-15);
    EXPECT_NEAR(expect, 0.430785, 1e-6);
}

TEST(MeanCrossings, SameForEveryNormalizedModel) {
    const double g = mean_crossings(CovarianceModel::gaussian(), 7.0, 1.3);
    EXPECT_DOUBLE_EQ(mean_crossings(CovarianceModel::damped_cosine(0.5), 7.0, 1.3), g);
    EXPECT_NEAR(std::log(g), log_mean_crossings(7.0, 1.3), 1e-14);
}

TEST(MeanCrossings, RejectsBadInput) {
    EXPECT_THROW(mean_crossings(CovarianceModel::gaussian(), -1.0, 0.0), DomainError);
    EXPECT_THROW(crossing_intensity(std::nan("")), DomainError);
}

TEST(PairIntegrand, FactorizesAtLargeLag) {
    // Independent endpoints: (E|X'| phi(u))^2 with E|X'| = sqrt(2/pi).
    for (double u : {0.0, 1.0, 2.5}) {
        const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
        const double expect = 2.0 / std::numbers::pi * phi * phi;
        EXPECT_NEAR(pair_integrand(CovarianceModel::gaussian(), 50.0, u), expect, 1e-14) << "u=" << u;
    }
}

TEST(PairIntegrand, SymmetricInLevel) {
    const auto m = CovarianceModel::gaussian();
    for (double tau : {0.3, 1.0, 2.0})
        EXPECT_NEAR(pair_integrand(m, tau, 1.7), pair_integrand(m, tau, -1.7), 1e-15) << "tau=" << tau;
}

TEST(VarianceRatio, DistanceToTwoShrinksWithLevel) {
    const auto m = CovarianceModel::gaussian();
    for (double T : {5.0, 20.0}) {
        double prev = 1e300;
        for (double u : {2.0, 3.0, 4.0}) {
            const auto r = variance_ratio(m, T, u);
            const double dist = std::abs(r.value - 2.0);
            EXPECT_LT(dist, prev) << "T=" << T << " u=" << u;
            EXPECT_LT(r.error, 1e-4);
            prev = dist;
        }
    }
}

TEST(VarianceRatio, NonNegativeVariance) {
    const auto m = CovarianceModel::gaussian();
    for (double T : {0.5, 2.0, 20.0})
        for (double u : {0.0, 1.0, 3.0}) EXPECT_GT(variance_ratio(m, T, u).value, 0.0) << T << " " << u;
}

TEST(VarianceRatio, NodeDoublingWithinReportedError) {
    const auto m = CovarianceModel::gaussian();
    QuadratureConfig fine;
    fine.hermite_nodes_2d = 64;
    const auto a = variance_ratio(m, 10.0, 2.0);
    const auto b = variance_ratio(m, 10.0, 2.0, fine);
    EXPECT_LE(std::abs(a.value - b.value), a.error + b.error);
}

TEST(VarianceRatio, RejectsBadHorizon) {
    EXPECT_THROW(variance_ratio(CovarianceModel::gaussian(), 0.0, 1.0), DomainError);
    EXPECT_THROW(variance_ratio(CovarianceModel::gaussian(), std::nan(""), 1.0), DomainError);
}

TEST(MomentReport, InternallyConsistent) {
    const auto m = CovarianceModel::gaussian();
    const MomentReport rep = moment_report(m, 10.0, 2.0);
    EXPECT_NEAR(rep.lambda, 0.430785, 1e-6);
    EXPECT_NEAR(rep.variance, rep.lambda * rep.ratio, 1e-14);
    // E N(N-1) = var N + (E N)^2 - E N.
    EXPECT_NEAR(rep.second_factorial, rep.variance + rep.lambda * rep.lambda - rep.lambda, 1e-12);
    EXPECT_NEAR(rep.second_factorial, second_factorial_moment(m, 10.0, 2.0).value, 1e-12);
    EXPECT_FALSE(rep.third_factorial.has_value());
}

TEST(ThirdFactorial, RareOnShortInterval) {
    const auto m = CovarianceModel::gaussian();
    const double lambda = mean_crossings(m, 1.0, 2.0);
    const auto t = third_factorial_moment(m, 1.0, 2.0);
    EXPECT_GE(t.value, -t.error);
    EXPECT_LT(t.value, lambda * lambda);
}

TEST(ThirdFactorial, GrowsWithInterval) {
    const auto m = CovarianceModel::gaussian();
    const auto a = third_factorial_moment(m, 2.0, 1.0);
    const auto b = third_factorial_moment(m, 4.0, 1.0);
    EXPECT_GT(a.value, 0.0);
    EXPECT_GT(b.value, a.value);
}

TEST(QuadratureConfigTest, Validation) {
    EXPECT_NO_THROW(QuadratureConfig{}.validate());
    QuadratureConfig c;
    c.hermite_nodes_2d = 4;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = {};
    c.tau_min = 0.0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = {};
    c.rel_tol = 0.5;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = {};
    c.diag_cutoff = -1.0;
    EXPECT_THROW(c.validate(), ConfigurationError);
}
