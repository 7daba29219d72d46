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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and pinned
// values live in the constants below; the process exits 1 if any criterion
// fails.

#include "levelcross/experiments.hpp"
#include "levelcross/regression.hpp"
#include "levelcross/rice.hpp"
#include "levelcross/simulate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace levelcross;

namespace {

constexpr std::uint64_t kSeed = 1;

// Criterion 1.
constexpr int kRegressionTuples = 200;
constexpr double kCrossCovTol = 1e-10;
constexpr double kVarYSlack = 1e-12;
// Criterion 2.
constexpr double kAsymTolCoarse = 0.02;  // h = k = 1e-2
constexpr double kAsymTolFine = 0.002;   // h = k = 1e-3
constexpr double kAlpha2Rel = 1e-3;
// Criterion 3.
constexpr int kExponentTriples = 1000;
// Criterion 4.
constexpr std::size_t kMcReplicas = 10000;
constexpr std::size_t kMcThirdReplicas = 100000;
constexpr double kMcDt = 0.005;
constexpr double kZ = 3.0;
// Criterion 5. Pinned after the Monte Carlo cross-check at T = 20, u = 2.
constexpr double kPinnedRatioT20U4 = 1.9702905;
constexpr double kPinnedRatioTol = 1e-3;
constexpr double kUniformityTol = 0.02;
// Criteria 6 and 7.
constexpr double kCltT = 2000.0;
constexpr double kCltGamma = 0.6;
constexpr std::size_t kCltReplicas = 2000;
constexpr double kCltDt = 0.01;
constexpr double kKsMinP = 0.01;
constexpr double kVarLo = 0.9, kVarHi = 1.1;
constexpr double kSkewMax = 0.2;
constexpr double kLadderTLow = 200.0;
constexpr std::size_t kLadderRepetitions = 20;
constexpr std::size_t kLadderReplicas = 500;
constexpr double kBlockB = 0.14, kBlockC = 0.05, kBlockMu = 10.0;
constexpr double kSmallBlockMax = 0.1;
// Criterion 8.
constexpr double kEll = 2.0, kPoissonLevel = 3.0;
constexpr std::size_t kPoissonReplicas = 5000;
constexpr double kTvMax = 0.05;
// Criterion 10. The R -> infinity limit of the normalized moment is
// exp(-u^2) / (pi^3 (1 + u^3)), at most 5.9e-3 on the tested levels.
constexpr double kEnvelopeBound = 0.01;
constexpr double kRefinementTol = 0.05;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct PathTally {
    std::size_t paths = 0;
    std::int64_t worst = 0;
    bool violation_raised = false;

    void add(std::size_t n, std::int64_t w) {
        paths += n;
        worst = std::max(worst, w);
    }
};

PathTally g_paths;

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int g_failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        const std::string what = e.what();
        if (what.find("|N - 2U|") != std::string::npos) g_paths.violation_raised = true;
        o = {false, "exception: " + what};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++g_failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

double rel_gap(double exact, double pred) { return std::abs(exact / pred - 1.0); }

Outcome regression_identities() {
    const auto m = CovarianceModel::gaussian();
    std::mt19937_64 gen(kSeed);
    std::uniform_real_distribution<double> log_gap(std::log(0.05), std::log(5.0));
    double worst_cov = 0.0, worst_var = 0.0;
    for (int t = 0; t < kRegressionTuples; ++t) {
        const int n = t % 2 == 0 ? 2 : 3;
        std::vector<double> times{0.0};
        for (int i = 1; i < n; ++i) times.push_back(times.back() + std::exp(log_gap(gen)));
        const RegressionSystem s = build_system(m, times);
        const Eigen::MatrixXd cross = s.sigma10 - s.psi * s.sigma;  // cov(Y, X)
        worst_cov = std::max(worst_cov, cross.cwiseAbs().maxCoeff());
        worst_var = std::max(worst_var, s.sigma_y.diagonal().maxCoeff());
    }
    return {worst_cov <= kCrossCovTol && worst_var <= 1.0 + kVarYSlack,
            fmt("max|cov(Y,X)| = %.2e (tol %.0e), max var Y = %.15f over %d tuples", worst_cov, kCrossCovTol,
                worst_var, kRegressionTuples)};
}

Outcome asymptotic_claims() {
    const auto m = CovarianceModel::gaussian();
    bool pass = true;
    std::ostringstream out;
    for (const auto& [h, tol] : {std::pair{1e-2, kAsymTolCoarse}, std::pair{1e-3, kAsymTolFine}}) {
        // det Sigma is 2e-18 at h = k = 1e-3, below the default degeneracy cutoff.
        const TripleQuantities q = triple_quantities(m, h, h, 1.0, 1e-30);
        const AsymptoticPrediction p = small_lag_asymptotics(m.d(), m.e(), h, h);
        const double g_det = rel_gap(q.det, p.det);
        const double g_a1 = rel_gap(q.alpha[0], p.alpha[0]);
        const double g_a3 = rel_gap(q.alpha[2], p.alpha[2]);
        const double g_v1 = rel_gap(q.var_y[0], p.var_y[0]);
        const double g_v2 = rel_gap(q.var_y[1], p.var_y[1]);
        const bool a2_ok = p.alpha[1] == 0.0 && std::abs(q.alpha[1]) < kAlpha2Rel * std::abs(p.var_y[0]);
        const bool ok = g_det <= tol && g_a1 <= tol && g_a3 <= tol && g_v1 <= tol && g_v2 <= tol && a2_ok;
        pass = pass && ok;
        out << fmt("h=k=%.0e [tol %.1f%%]: det %.2e, a1 %.2e, a3 %.2e, varY1 %.2e (exact/pred %.3e), varY2 %.2e "
                   "(exact/pred %.3e), a2 %s; ",
                   h, 100 * tol, g_det, g_a1, g_a3, g_v1, q.var_y[0] / p.var_y[0], g_v2, q.var_y[1] / p.var_y[1],
                   a2_ok ? "ok" : "bad");
    }
    return {pass, out.str() + "relative gaps listed"};
}

Outcome exponent_claim() {
    const auto m = CovarianceModel::gaussian();
    std::mt19937_64 gen(kSeed + 1);
    std::uniform_real_distribution<double> log_lag(std::log(0.01), std::log(10.0));
    std::uniform_real_distribution<double> level(0.1, 5.0);
    int bad = 0;
    double min_margin = 1e300;
    for (int t = 0; t < kExponentTriples; ++t) {
        const double h = std::exp(log_lag(gen)), k = std::exp(log_lag(gen)), u = level(gen);
        const TripleQuantities q = triple_quantities(m, h, k, u);
        const double margin = q.exponent / (u * u) - 1.0;
        min_margin = std::min(min_margin, margin);
        if (!(q.exponent > u * u)) ++bad;
    }
    return {bad == 0, fmt("%d of %d triples violate u S^-1 u > u^2; min relative margin %.3e", bad,
                          kExponentTriples, min_margin)};
}

Outcome rice_vs_monte_carlo() {
    const auto m = CovarianceModel::gaussian();
    const MomentReport rice = moment_report(m, 10.0, 2.0);
    const McMoments mc = mc_moments(m, 10.0, 2.0, kMcDt, kMcReplicas, kSeed);
    g_paths.add(mc.replicas, mc.max_abs_n_minus_2u);
    const double z_mean = (mc.mean.value - rice.lambda) / mc.mean.se;
    const double z_var = (mc.variance.value - rice.variance) / std::hypot(mc.variance.se, rice.quad_error.variance);

    const MomentEstimate t3 = third_factorial_moment(m, 5.0, 1.5);
    const McMoments mc3 = mc_moments(m, 5.0, 1.5, kMcDt, kMcThirdReplicas, kSeed + 1);
    g_paths.add(mc3.replicas, mc3.max_abs_n_minus_2u);
    const double z_third = (mc3.third_factorial.value - t3.value) / std::hypot(mc3.third_factorial.se, t3.error);

    const bool pass = std::abs(z_mean) <= kZ && std::abs(z_var) <= kZ && std::abs(z_third) <= kZ;
    return {pass, fmt("T=10,u=2: E N rice %.6f mc %.6f (z %.2f); var N rice %.6f mc %.6f (z %.2f); "
                      "T=5,u=1.5: E N[3] rice %.6f mc %.6f (z %.2f)",
                      rice.lambda, mc.mean.value, z_mean, rice.variance, mc.variance.value, z_var, t3.value,
                      mc3.third_factorial.value, z_third)};
}

Outcome variance_ratio_limit() {
    const auto m = CovarianceModel::gaussian();
    std::vector<double> r;
    for (double u : {2.0, 3.0, 4.0}) r.push_back(variance_ratio(m, 20.0, u).value);
    const bool decreasing = std::abs(r[1] - 2.0) < std::abs(r[0] - 2.0) && std::abs(r[2] - 2.0) < std::abs(r[1] - 2.0);
    const bool pinned = std::abs(r[2] - kPinnedRatioT20U4) <= kPinnedRatioTol;

    // Oracle behind the pin: Monte Carlo ratio at T = 20, u = 2.
    const McMoments mc = mc_moments(m, 20.0, 2.0, kMcDt, kMcReplicas, kSeed + 2);
    g_paths.add(mc.replicas, mc.max_abs_n_minus_2u);
    const double z = (mc.ratio.value - r[0]) / mc.ratio.se;
    const bool oracle = std::abs(z) <= kZ;

    const double r10 = variance_ratio(m, 10.0, 3.0).value;
    const double r40 = variance_ratio(m, 40.0, 3.0).value;
    const bool uniform = std::abs(r10 - r40) <= kUniformityTol;
    return {decreasing && pinned && oracle && uniform,
            fmt("T=20 ratios u=2,3,4: %.7f %.7f %.7f (decreasing %s); u=4 vs pin %.7f: %s; mc ratio u=2 %.4f "
                "(z %.2f): %s; u=3 T=10 %.5f vs T=40 %.5f, gap %.4f (tol %.2f): %s",
                r[0], r[1], r[2], decreasing ? "yes" : "no", kPinnedRatioT20U4, pinned ? "ok" : "off", mc.ratio.value,
                z, oracle ? "ok" : "off", r10, r40, std::abs(r10 - r40), kUniformityTol,
                uniform ? "ok" : "not uniform")};
}

Outcome clt_surrogate() {
    const auto m = CovarianceModel::gaussian();
    const ExperimentReport rep = run_clt_experiment(m, kCltT, kCltGamma, kCltReplicas, kCltDt, kSeed);
    g_paths.add(rep.replicas.size(), static_cast<std::int64_t>(rep.statistic("max_abs_n_minus_2u")));
    const double p = rep.statistic("ks_p_value"), var = rep.statistic("variance"), skew = rep.statistic("skewness");
    const bool fixed_t = p > kKsMinP && var >= kVarLo && var <= kVarHi && std::abs(skew) < kSkewMax;

    const LadderResult lad =
        clt_ladder(m, kLadderTLow, kCltT, kCltGamma, kLadderRepetitions, kLadderReplicas, kCltDt, kSeed + 100);
    g_paths.add(2 * kLadderRepetitions * kLadderReplicas, 0);  // clt_sample rejects any |N - 2U| > 1
    const bool ladder = lad.median_high > lad.median_low;
    return {fixed_t && ladder,
            fmt("u_T %.4f, lambda_T %.2f; KS p %.4f (jittered diagnostic %.4f), variance %.4f (rice predicts %.4f), skewness %.4f; ladder "
                "median p T=%.0f %.4f -> T=%.0f %.4f",
                rep.statistic("u_T"), rep.statistic("lambda_T"), p, rep.statistic("ks_p_value_jittered"), var, rep.statistic("rice_predicted_variance"),
                skew, kLadderTLow, lad.median_low, kCltT, lad.median_high)};
}

Outcome small_block_criterion() {
    const auto m = CovarianceModel::gaussian();
    const ExperimentReport rep =
        run_block_experiment(m, kCltT, kCltGamma, kBlockB, kBlockC, kBlockMu, kCltReplicas, kCltDt, kSeed);
    g_paths.add(rep.replicas.size(), static_cast<std::int64_t>(rep.statistic("max_abs_n_minus_2u")));
    const double mass = rep.statistic("small_block_mass");
    return {mass < kSmallBlockMax,
            fmt("E(sum Y_k)^2 over short blocks %.4f +- %.4f (threshold %.2f); whole-interval contrast %.4f",
                mass, rep.statistic("small_block_mass_se"), kSmallBlockMax, rep.statistic("whole_block_mass"))};
}

Outcome poisson_regime() {
    const auto m = CovarianceModel::gaussian();
    const ExperimentReport rep = run_poisson_experiment(m, kEll, kPoissonLevel, kPoissonReplicas, 0.0, kSeed);
    g_paths.add(rep.replicas.size(), static_cast<std::int64_t>(rep.statistic("max_abs_n_minus_2u")));
    const double tv = rep.statistic("tv_distance");
    const double z = (rep.statistic("mean_U") - kEll) / rep.statistic("mean_U_se");
    return {tv < kTvMax && std::abs(z) <= kZ,
            fmt("T %.1f, TV %.4f (threshold %.2f), mean U %.4f +- %.4f (z %.2f)", rep.statistic("T"), tv, kTvMax,
                rep.statistic("mean_U"), rep.statistic("mean_U_se"), z)};
}

Outcome structural_law() {
    return {g_paths.worst <= 1 && !g_paths.violation_raised && g_paths.paths > 0,
            fmt("max |N - 2U| = %lld over %zu simulated paths", static_cast<long long>(g_paths.worst),
                g_paths.paths)};
}

Outcome third_moment_envelope() {
    const auto m = CovarianceModel::gaussian();
    QuadratureConfig coarse, fine;
    fine.hermite_nodes_3d = 2 * coarse.hermite_nodes_3d;
    double worst_ratio = 0.0, worst_change = 0.0;
    std::ostringstream out;
    for (double R : {2.0, 5.0, 10.0}) {
        for (double u : {1.0, 2.0, 3.0}) {
            const double env = R * R * R * (1.0 + u * u * u) * std::exp(-0.5 * u * u);
            const double a = third_factorial_moment(m, R, u, coarse).value / env;
            const double b = third_factorial_moment(m, R, u, fine).value / env;
            worst_ratio = std::max({worst_ratio, a, b});
            worst_change = std::max(worst_change, std::abs(b / a - 1.0));
            out << fmt("R=%g,u=%g %.3e; ", R, u, a);
        }
    }
    return {worst_ratio <= kEnvelopeBound && worst_change < kRefinementTol,
            out.str() + fmt("max %.3e (bound %.2f), max refinement change %.2e (tol %.0f%%)", worst_ratio,
                            kEnvelopeBound, worst_change, 100 * kRefinementTol)};
}

}  // namespace

int main() {
    std::printf("levelcross acceptance suite (workers: %u)\n", worker_count());
    report(1, "regression identities", regression_identities);
    report(2, "small-lag asymptotic claims", asymptotic_claims);
    report(3, "exponent claim", exponent_claim);
    report(4, "Rice vs Monte Carlo", rice_vs_monte_carlo);
    report(5, "variance ratio limit", variance_ratio_limit);
    report(6, "CLT at fixed T", clt_surrogate);
    report(7, "small-block mass", small_block_criterion);
    report(8, "Poisson regime", poisson_regime);
    report(9, "structural law |N - 2U| <= 1", structural_law);
    report(10, "third-moment envelope", third_moment_envelope);
    std::printf("%d of 10 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
