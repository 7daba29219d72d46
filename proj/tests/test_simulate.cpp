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

#include "levelcross/simulate.hpp"
#include "levelcross/philox.hpp"
#include "levelcross/rice.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

using namespace levelcross;

TEST(Philox, KnownAnswerZero) {
    const auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(r, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
    const auto r = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(r, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPiDigits) {
    const auto r = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(r, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, UniformRange) {
    EXPECT_GT(uniform_open_closed(0, 0), 0.0);
    EXPECT_EQ(uniform_open_closed(0xffffffffu, 0xffffffffu), 1.0);
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double u = uniform_at(3, 1, i);
        EXPECT_GT(u, 0.0);
        EXPECT_LE(u, 1.0);
    }
}

TEST(Philox, NormalPairMoments) {
    double s = 0.0, s2 = 0.0, cross = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = normal_pair(11, 0, static_cast<std::uint64_t>(i));
        s += a + b;
        s2 += a * a + b * b;
        cross += a * b;
    }
    EXPECT_NEAR(s / (2 * n), 0.0, 4.0 / std::sqrt(2.0 * n));
    EXPECT_NEAR(s2 / (2 * n), 1.0, 4.0 * std::sqrt(2.0 / (2 * n)));
    EXPECT_NEAR(cross / n, 0.0, 4.0 / std::sqrt(n));
}

TEST(Grid, IntervalCount) {
    EXPECT_EQ(grid_intervals(10.0, 0.005), 2000u);
    EXPECT_EQ(grid_intervals(1.0, 0.3), 4u);
    EXPECT_EQ(grid_intervals(0.0, 0.1), 0u);
    EXPECT_THROW(grid_intervals(1.0, 0.0), DomainError);
    EXPECT_THROW(grid_intervals(-1.0, 0.1), DomainError);
}

TEST(Grid, DefaultStep) {
    EXPECT_DOUBLE_EQ(default_dt(0.5), 0.01);
    EXPECT_DOUBLE_EQ(default_dt(-20.0), 0.005);
}

TEST(CountCrossings, AllBelowLevel) {
    const std::vector<double> v{-1.0, 0.5, 1.9, 0.0};
    EXPECT_EQ(count_crossings(v, 2.0), (CrossingCount{0, 0}));
}

TEST(CountCrossings, SingleExcursion) {
    const std::vector<double> v{0.0, 1.0, 2.5, 3.0, 1.0, 0.0};
    EXPECT_EQ(count_crossings(v, 2.0), (CrossingCount{2, 1}));
}

TEST(CountCrossings, TouchingTheLevelCounts) {
    // A grid value equal to u counts as being at or above the level.
    const std::vector<double> v{1.0, 2.0, 1.0};
    EXPECT_EQ(count_crossings(v, 2.0), (CrossingCount{2, 1}));
    const std::vector<double> w{2.0, 2.0, 2.0};
    EXPECT_EQ(count_crossings(w, 2.0), (CrossingCount{0, 0}));
}

TEST(CountCrossings, DegeneratePaths) {
    EXPECT_EQ(count_crossings(std::vector<double>{}, 0.0), (CrossingCount{0, 0}));
    EXPECT_EQ(count_crossings(std::vector<double>{1.0}, 0.0), (CrossingCount{0, 0}));
}

TEST(CountCrossings, AdditiveOverCellRanges) {
    const PathGrid p = sample_path(CovarianceModel::gaussian(), 20.0, 0.01, 5, 0);
    const std::size_t cells = p.values.size() - 1;
    for (double u : {-0.5, 0.0, 1.0}) {
        const CrossingCount whole = count_crossings(p, u);
        CrossingCount sum;
        for (std::size_t b = 0; b < cells; b += 137) {
            const CrossingCount part = count_crossings(p.values, u, b, std::min(b + 137, cells));
            sum.N += part.N;
            sum.U += part.U;
        }
        EXPECT_EQ(sum, whole) << "u=" << u;
        EXPECT_LE(std::abs(whole.N - 2 * whole.U), 1);
    }
}

TEST(Sampler, Deterministic) {
    const CovarianceModel m = CovarianceModel::gaussian();
    const PathGrid a = sample_path(m, 1.0, 0.01, 42, 3);
    const PathGrid b = sample_path(m, 1.0, 0.01, 42, 3);
    ASSERT_EQ(a.values.size(), 101u);
    EXPECT_EQ(a.values, b.values);
    const PathGrid c = sample_path(m, 1.0, 0.01, 43, 3);
    EXPECT_NE(a.values, c.values);
}

TEST(Sampler, IndependentOfWorkerCount) {
    const CirculantSampler s(CovarianceModel::damped_cosine(0.5), 5.0, 0.01);
    auto collect = [&](unsigned workers) {
        std::vector<double> sums(37);
        for_each_path(
            s, 9, sums.size(),
            [&](std::size_t id, std::span<const double> v) {
                double acc = 0.0;
                for (double x : v) acc += x * x;
                sums[id] = acc;
            },
            workers);
        return sums;
    };
    EXPECT_EQ(collect(1), collect(3));
}

TEST(Sampler, MatchesSinglePathDraws) {
    const CirculantSampler s(CovarianceModel::gaussian(), 2.0, 0.02);
    std::vector<std::vector<double>> paths(5);
    for_each_path(s, 17, paths.size(),
                  [&](std::size_t id, std::span<const double> v) { paths[id].assign(v.begin(), v.end()); });
    for (std::size_t i = 0; i < paths.size(); ++i) EXPECT_EQ(paths[i], s.sample(17, i).values) << i;
}

TEST(Sampler, EmpiricalCovariance) {
    const CovarianceModel m = CovarianceModel::gaussian();
    const CirculantSampler s(m, 1.0, 0.01);
    const std::size_t n = 10000;
    std::vector<double> x0(n), x1(n), xm(n);
    for_each_path(s, 2024, n, [&](std::size_t id, std::span<const double> v) {
        x0[id] = v[0];
        xm[id] = v[50];
        x1[id] = v[100];
    });
    double c01 = 0.0, v0 = 0.0, vm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c01 += x0[i] * x1[i];
        v0 += x0[i] * x0[i];
        vm += xm[i] * xm[i];
    }
    const double dn = static_cast<double>(n);
    const double rho = m.r(1.0);
    EXPECT_NEAR(c01 / dn, rho, 3.0 * std::sqrt((1.0 + rho * rho) / dn));
    EXPECT_NEAR(v0 / dn, 1.0, 3.0 * std::sqrt(2.0 / dn));
    EXPECT_NEAR(vm / dn, 1.0, 3.0 * std::sqrt(2.0 / dn));
}

TEST(Sampler, ShortHorizonIsEmbeddable) {
    const CirculantSampler s(CovarianceModel::gaussian(), 1.0, 0.01);
    EXPECT_GE(s.padded_length(), 4 * s.intervals());
    EXPECT_GE(s.min_eigenvalue(), -1e-8);
}

TEST(Sampler, NonEmbeddableModel) {
    try {
        CirculantSampler s(CovarianceModel::cosine(), 10.0, 0.1);
        FAIL() << "expected NonEmbeddableError";
    } catch (const NonEmbeddableError& e) {
        EXPECT_LT(e.min_eigenvalue(), 0.0);
        EXPECT_NE(std::string(e.what()).find("padded length"), std::string::npos);
    }
}

TEST(McMoments, MeanMatchesRice) {
    const CovarianceModel m = CovarianceModel::gaussian();
    const McMoments mc = mc_moments(m, 10.0, 2.0, 0.005, 4000, 1);
    EXPECT_NEAR(mc.mean.value, mean_crossings(m, 10.0, 2.0), 3.0 * mc.mean.se);
    EXPECT_LE(mc.max_abs_n_minus_2u, 1);
    EXPECT_EQ(mc.counts.size(), 4000u);
}

TEST(McMoments, RareLevel) {
    const McMoments mc = mc_moments(CovarianceModel::gaussian(), 10.0, 8.0, 0.01, 200, 3);
    EXPECT_EQ(mc.mean.value, 0.0);
}

TEST(McMoments, RejectsTooFewReplicas) {
    EXPECT_THROW(mc_moments(CovarianceModel::gaussian(), 10.0, 2.0, 0.01, 99, 1), DomainError);
}

TEST(McMoments, SummaryOfKnownCounts) {
    std::vector<CrossingCount> c{{0, 0}, {2, 1}, {3, 1}, {1, 1}};
    const McMoments m = summarize_counts(c);
    EXPECT_DOUBLE_EQ(m.mean.value, 1.5);
    EXPECT_DOUBLE_EQ(m.variance.value, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.second_factorial.value, 2.0);  // (0 + 2 + 6 + 0) / 4
    EXPECT_DOUBLE_EQ(m.third_factorial.value, 1.5);   // (0 + 0 + 6 + 0) / 4
    EXPECT_DOUBLE_EQ(m.ratio.value, (5.0 / 3.0) / 1.5);
    EXPECT_EQ(m.max_abs_n_minus_2u, 1);
}
