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

#include "levelcross/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace levelcross;

TEST(Kolmogorov, SurvivalBranchesAgree) {
    // Both series are valid near the switch point.
    EXPECT_NEAR(kolmogorov_survival(1.1799999), kolmogorov_survival(1.18), 1e-6);
    EXPECT_NEAR(kolmogorov_survival(1.36), 0.0494, 5e-4);
    EXPECT_NEAR(kolmogorov_survival(1.63), 0.0098, 2e-4);
    EXPECT_DOUBLE_EQ(kolmogorov_survival(0.0), 1.0);
    EXPECT_LT(kolmogorov_survival(5.0), 1e-20);
}

TEST(KsTest, PointMassAtZero) {
    const std::vector<double> x(100, 0.0);
    const KsResult r = ks_test(x);
    EXPECT_NEAR(r.statistic, 0.5, 1e-15);
    EXPECT_LT(r.p_value, 1e-10);
}

TEST(KsTest, NormalSampleNotRejected) {
    std::mt19937_64 gen(123);
    std::normal_distribution<double> z;
    std::vector<double> x(100000);
    for (double& v : x) v = z(gen);
    EXPECT_GT(ks_test(x).p_value, 1e-4);
}

TEST(KsTest, PValuesRoughlyUniformUnderNull) {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> z;
    int below_tenth = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x(500);
        for (double& v : x) v = z(gen);
        if (ks_test(x).p_value < 0.1) ++below_tenth;
    }
    // Binomial(400, 0.1): mean 40, sd 6.
    EXPECT_GT(below_tenth, 18);
    EXPECT_LT(below_tenth, 62);
}

TEST(KsTest, DetectsShift) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> z(0.5, 1.0);
    std::vector<double> x(10000);
    for (double& v : x) v = z(gen);
    EXPECT_LT(ks_test(x).p_value, 1e-6);
}

TEST(KsTest, RejectsSmallOrNonFiniteSamples) {
    EXPECT_THROW(ks_test(std::vector<double>(49, 0.0)), DomainError);
    std::vector<double> x(60, 0.0);
    x[3] = std::nan("");
    EXPECT_THROW(ks_test(x), DomainError);
}

TEST(TvDistance, ExactPoissonHistogram) {
    const double ell = 2.0;
    std::vector<double> h;
    double p = std::exp(-ell);
    for (int k = 0; k < 40; ++k) {
        h.push_back(1e6 * p);
        p *= ell / (k + 1);
    }
    EXPECT_LT(tv_distance(h, ell), 1e-9);
}

TEST(TvDistance, AllMassAtZero) {
    const std::vector<double> h{50.0};
    EXPECT_NEAR(tv_distance(h, 2.0), 1.0 - std::exp(-2.0), 1e-9);
    EXPECT_NEAR(tv_distance(h, 2.0), 0.8647, 1e-4);
}

TEST(TvDistance, MassBeyondPoissonSupportCounts) {
    std::vector<double> h(200, 0.0);
    h[199] = 1.0;
    EXPECT_NEAR(tv_distance(h, 2.0), 1.0, 1e-9);
}

TEST(TvDistance, PoissonSampleNoise) {
    std::mt19937_64 gen(77);
    std::poisson_distribution<std::int64_t> pois(2.0);
    std::vector<std::int64_t> x(10000);
    for (auto& v : x) v = pois(gen);
    EXPECT_LT(tv_distance(histogram(x), 2.0), 0.03);
}

TEST(TvDistance, RejectsBadInput) {
    EXPECT_THROW(tv_distance(std::vector<double>{}, 2.0), DomainError);
    EXPECT_THROW(tv_distance(std::vector<double>{0.0, 0.0}, 2.0), DomainError);
    EXPECT_THROW(tv_distance(std::vector<double>{1.0}, 0.0), DomainError);
}

TEST(Histogram, CountsValues) {
    const std::vector<std::int64_t> x{0, 2, 2, 5};
    EXPECT_EQ(histogram(x), (std::vector<double>{1, 0, 2, 0, 0, 1}));
    EXPECT_THROW(histogram(std::vector<std::int64_t>{-1}), DomainError);
}

TEST(SampleMomentsTest, SmallSample) {
    const std::vector<double> x{1.0, 2.0, 3.0, 10.0};
    const SampleMoments m = sample_moments(x);
    EXPECT_DOUBLE_EQ(m.mean, 4.0);
    EXPECT_DOUBLE_EQ(m.variance, 50.0 / 3.0);
    // Central moments: m2 = 12.5, m3 = 45.
    EXPECT_NEAR(m.skewness, 45.0 / std::pow(12.5, 1.5), 1e-14);
    EXPECT_THROW(sample_moments(std::vector<double>{1.0}), DomainError);
}

TEST(Median, OddAndEven) {
    EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_THROW(median({}), DomainError);
}
