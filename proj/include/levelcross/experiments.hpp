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
 * @file experiments.hpp
 * @brief Drivers for the variance-ratio, CLT, block and Poisson experiments.
 *
 * Every driver is a parallel map over replicas into per-replica slots
 * followed by a reduction in replica order, so reports depend only on the
 * arguments and the seed.
 */

#pragma once

#include "levelcross/covariance.hpp"
#include "levelcross/errors.hpp"
#include "levelcross/philox.hpp"
#include "levelcross/rice.hpp"
#include "levelcross/simulate.hpp"
#include "levelcross/stats.hpp"

#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace levelcross {

struct LevelSchedule {
    double gamma = 0.0;
    double T = 0.0;
    double u_T = 0.0;
    double lambda_T = 0.0;
};

/// Level u_T with T C(u_T) = T^gamma.
inline LevelSchedule level_schedule(double T, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigurationError("level_schedule: gamma must lie in (0, 1)");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigurationError("level_schedule: T must be positive");
    const double arg = (1.0 - gamma) * std::log(T) - std::log(std::numbers::pi);
    if (!(arg > 0.0))
        throw NoSolutionError("level_schedule: T^(1-gamma) <= pi, no real level solves lambda(T, u) = T^gamma");
    return {gamma, T, std::sqrt(2.0 * arg), std::pow(T, gamma)};
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct BlockScheme {
    double gamma = 0.0;
    double b = 0.0;
    double c = 0.0;
    double mu = 0.0;
    double T = 0.0;
    std::size_t n_T = 0;
    double p_T = 0.0;
    double q_T = 0.0;
    std::vector<Interval> I_blocks;  // long blocks, length p_T
    std::vector<Interval> J_blocks;  // short gaps, length q_T

    /// n_T (p_T + q_T), the right end of the tiling.
    double horizon() const noexcept { return static_cast<double>(n_T) * (p_T + q_T); }
};

/// Checks 0 < c < b < gamma/4, mu b > 1 and mu gamma > 4, naming the first
/// violated inequality.
inline void validate_block_exponents(double gamma, double b, double c, double mu) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigurationError("block_scheme: gamma must lie in (0, 1)");
    if (!(0.0 < c)) throw InvalidSchemeError("block_scheme: violates 0 < c");
    if (!(c < b)) throw InvalidSchemeError("block_scheme: violates c < b");
    if (!(b < gamma / 4.0)) throw InvalidSchemeError("block_scheme: violates b < γ/4");
    if (!(mu * b > 1.0)) throw InvalidSchemeError("block_scheme: violates μ·b > 1");
    if (!(mu * gamma > 4.0)) throw InvalidSchemeError("block_scheme: violates μ·γ > 4");
}

/// Bernstein blocks on [0, n_T (p_T + q_T)] with n_T = ceil(T^(1-b)),
/// p_T = T^b, q_T = T^c. Since n_T p_T >= T the tiling overhangs T; the
/// overhang is reported by block_audit.
inline BlockScheme block_scheme(double T, double gamma, double b, double c, double mu) {
    if (!(T > 1.0) || !std::isfinite(T)) throw ConfigurationError("block_scheme: T must exceed 1");
    validate_block_exponents(gamma, b, c, mu);

    BlockScheme s;
    s.gamma = gamma;
    s.b = b;
    s.c = c;
    s.mu = mu;
    s.T = T;
    s.n_T = static_cast<std::size_t>(std::ceil(std::pow(T, 1.0 - b)));
    s.p_T = std::pow(T, b);
    s.q_T = std::pow(T, c);
    s.I_blocks.reserve(s.n_T);
    s.J_blocks.reserve(s.n_T);
    const double step = s.p_T + s.q_T;
    for (std::size_t k = 0; k < s.n_T; ++k) {
        const double start = static_cast<double>(k) * step;
        s.I_blocks.push_back({start, start + s.p_T});
        s.J_blocks.push_back({start + s.p_T, static_cast<double>(k + 1) * step});
    }
    return s;
}

using NamedValues = std::vector<std::pair<std::string, double>>;

inline NamedValues block_audit(const BlockScheme& s) {
    const double L = s.horizon();
    const double n = static_cast<double>(s.n_T);
    return {{"n_T", n},
            {"p_T", s.p_T},
            {"q_T", s.q_T},
            {"horizon", L},
            {"long_fraction", n * s.p_T / s.T},
            {"short_fraction", n * s.q_T / s.T},
            {"overhang", L - s.T}};
}

enum class ExperimentKind { ratio, clt, poisson, blocks };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::ratio: return "ratio";
        case ExperimentKind::clt: return "clt";
        case ExperimentKind::poisson: return "poisson";
        case ExperimentKind::blocks: return "blocks";
    }
    return "ratio";
}

struct Column {
    std::string name;
    std::vector<double> values;
};

struct ReplicaRecord {
    std::uint64_t replica_id = 0;
    std::int64_t N = 0;
    std::int64_t U = 0;
    std::vector<double> extra;
};

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::ratio;
    std::uint64_t seed = 0;
    std::vector<Column> table;
    NamedValues statistics;
    NamedValues audit;
    std::vector<std::string> extra_columns;
    std::vector<ReplicaRecord> replicas;
    std::vector<PlotSeries> plots;
    std::string config_echo;

    double statistic(const std::string& name) const {
        for (const auto& [k, v] : statistics)
            if (k == name) return v;
        throw DomainError("report has no statistic '" + name + "'");
    }
};

namespace detail {

inline void require_conditions(const CovarianceModel& model) {
    const ConditionReport rep = check_conditions(model, 0.5, 100.0);
    if (!rep.normalization_ok) throw InvalidModelError(model.name() + ": requires r(0) = 1 and r''(0) = -1");
    if (!rep.tail_converged)
        throw InvalidModelError(model.name() + ": |r| + |r'| + |r''| is not integrable on the checked range");
}

inline void require_structural_law(const CrossingCount& c, std::uint64_t id) {
    if (std::abs(c.N - 2 * c.U) > 1)
        throw NumericalError("replica " + std::to_string(id) + ": |N - 2U| > 1 (N = " + std::to_string(c.N) +
                             ", U = " + std::to_string(c.U) + ")");
}

inline double resolve_dt(double dt, double u) { return dt > 0.0 ? dt : default_dt(u); }

/// Grid index nearest to t.
inline std::size_t grid_index(double t, double dt) { return static_cast<std::size_t>(std::llround(t / dt)); }

struct CltSample {
    LevelSchedule schedule;
    std::vector<CrossingCount> counts;
    std::vector<double> z;
};

inline CltSample clt_sample(const CovarianceModel& model, double T, double gamma, std::size_t replicas, double dt,
                            std::uint64_t seed) {
    if (replicas < 500) throw ConfigurationError("clt: needs at least 500 replicas");
    CltSample out;
    out.schedule = level_schedule(T, gamma);
    const double u = out.schedule.u_T;
    const CirculantSampler sampler(model, T, resolve_dt(dt, u));
    out.counts.resize(replicas);
    for_each_path(sampler, seed, replicas,
                  [&](std::size_t id, std::span<const double> v) { out.counts[id] = count_crossings(v, u); });
    const double scale = std::sqrt(2.0 * out.schedule.lambda_T);
    out.z.resize(replicas);
    for (std::size_t i = 0; i < replicas; ++i) {
        require_structural_law(out.counts[i], i);
        out.z[i] = (static_cast<double>(out.counts[i].N) - out.schedule.lambda_T) / scale;
    }
    return out;
}

}  // namespace detail

/// Philox stream offset for per-replica jitter, disjoint from path streams.
inline constexpr std::uint64_t jitter_stream = std::uint64_t{1} << 63;

/// Rice and Monte Carlo variance/mean ratios over the grid T_list x u_list.
/// dt <= 0 selects default_dt(u) per level.
inline ExperimentReport run_ratio_experiment(const CovarianceModel& model, const std::vector<double>& T_list,
                                             const std::vector<double>& u_list, const QuadratureConfig& cfg,
                                             std::uint64_t seed, std::size_t replicas, double dt = 0.0) {
    detail::require_conditions(model);
    cfg.validate();
    ExperimentReport rep;
    rep.kind = ExperimentKind::ratio;
    rep.seed = seed;
    rep.extra_columns = {"T", "u"};
    Column cT{"T", {}}, cu{"u", {}}, crice{"rice_ratio", {}}, cerr{"rice_error", {}}, cmc{"mc_ratio", {}},
        cse{"mc_stderr", {}}, cmean{"mc_mean", {}}, clam{"lambda", {}};
    std::int64_t worst = 0;
    std::uint64_t offset = 0;
    for (double T : T_list) {
        for (double u : u_list) {
            const MomentEstimate rice = variance_ratio(model, T, u, cfg);
            const McMoments mc = mc_moments(model, T, u, detail::resolve_dt(dt, u), replicas, seed);
            for (std::size_t i = 0; i < mc.counts.size(); ++i) {
                detail::require_structural_law(mc.counts[i], i);
                rep.replicas.push_back({offset + i, mc.counts[i].N, mc.counts[i].U, {T, u}});
            }
            offset += mc.counts.size();
            worst = std::max(worst, mc.max_abs_n_minus_2u);
            cT.values.push_back(T);
            cu.values.push_back(u);
            crice.values.push_back(rice.value);
            cerr.values.push_back(rice.error);
            cmc.values.push_back(mc.ratio.value);
            cse.values.push_back(mc.ratio.se);
            cmean.values.push_back(mc.mean.value);
            clam.values.push_back(mean_crossings(model, T, u));
        }
    }
    for (std::size_t i = 0; i < T_list.size(); ++i) {
        PlotSeries s{"rice_ratio_T" + std::to_string(T_list[i]), {}, {}};
        for (std::size_t j = 0; j < u_list.size(); ++j) {
            s.x.push_back(u_list[j]);
            s.y.push_back(crice.values[i * u_list.size() + j]);
        }
        rep.plots.push_back(std::move(s));
    }
    double max_z = 0.0;
    for (std::size_t i = 0; i < cmc.values.size(); ++i)
        if (cse.values[i] > 0.0) max_z = std::max(max_z, std::abs(cmc.values[i] - crice.values[i]) / cse.values[i]);
    rep.statistics = {{"max_abs_n_minus_2u", static_cast<double>(worst)}, {"max_ratio_zscore", max_z}};
    rep.table = {cT, cu, crice, cerr, cmc, cse, cmean, clam};
    return rep;
}

/// Standardized counts (N - T^gamma) / sqrt(2 T^gamma) at the level u_T.
inline ExperimentReport run_clt_experiment(const CovarianceModel& model, double T, double gamma,
                                           std::size_t replicas, double dt, std::uint64_t seed,
                                           const QuadratureConfig& cfg = {}) {
    detail::require_conditions(model);
    const detail::CltSample s = detail::clt_sample(model, T, gamma, replicas, dt, seed);
    const KsResult ks = ks_test(s.z);
    // Diagnostic only: the counts live on a lattice of step 1/sqrt(2 lambda),
    // which by itself bounds the KS distance away from 0. Spreading each
    // count uniformly over its cell removes that floor.
    std::vector<double> jittered(s.z.size());
    const double scale = std::sqrt(2.0 * s.schedule.lambda_T);
    for (std::size_t i = 0; i < s.z.size(); ++i)
        jittered[i] = s.z[i] + (uniform_at(seed, jitter_stream + i, 0) - 0.5) / scale;
    const KsResult ks_jittered = ks_test(jittered);
    const SampleMoments m = sample_moments(s.z);
    const MomentEstimate rice = variance_ratio(model, T, s.schedule.u_T, cfg);

    ExperimentReport rep;
    rep.kind = ExperimentKind::clt;
    rep.seed = seed;
    rep.extra_columns = {"standardized_stat"};
    std::int64_t worst = 0;
    for (std::size_t i = 0; i < s.z.size(); ++i) {
        rep.replicas.push_back({i, s.counts[i].N, s.counts[i].U, {s.z[i]}});
        worst = std::max(worst, std::abs(s.counts[i].N - 2 * s.counts[i].U));
    }
    rep.statistics = {{"u_T", s.schedule.u_T},
                      {"lambda_T", s.schedule.lambda_T},
                      {"ks_statistic", ks.statistic},
                      {"ks_p_value", ks.p_value},
                      {"ks_p_value_jittered", ks_jittered.p_value},
                      {"mean", m.mean},
                      {"variance", m.variance},
                      {"skewness", m.skewness},
                      {"excess_kurtosis", m.excess_kurtosis},
                      {"rice_ratio", rice.value},
                      {"rice_predicted_variance", rice.value / 2.0},
                      {"max_abs_n_minus_2u", static_cast<double>(worst)}};

    std::vector<double> sorted = s.z;
    std::sort(sorted.begin(), sorted.end());
    PlotSeries ecdf{"ecdf", {}, {}}, phi{"normal_cdf", {}, {}};
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        ecdf.x.push_back(sorted[i]);
        ecdf.y.push_back(static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
        phi.x.push_back(sorted[i]);
        phi.y.push_back(detail::normal_cdf(sorted[i]));
    }
    rep.plots = {std::move(ecdf), std::move(phi)};
    return rep;
}

struct LadderResult {
    std::vector<double> p_low;
    std::vector<double> p_high;
    double median_low = 0.0;
    double median_high = 0.0;
};

/// KS p-values at two horizons over `repetitions` seeds (seed, seed + 1, ...).
inline LadderResult clt_ladder(const CovarianceModel& model, double T_low, double T_high, double gamma,
                               std::size_t repetitions, std::size_t replicas, double dt, std::uint64_t seed) {
    if (repetitions == 0) throw ConfigurationError("clt_ladder: repetitions must be positive");
    LadderResult r;
    for (std::size_t i = 0; i < repetitions; ++i) {
        r.p_low.push_back(ks_test(detail::clt_sample(model, T_low, gamma, replicas, dt, seed + i).z).p_value);
        r.p_high.push_back(ks_test(detail::clt_sample(model, T_high, gamma, replicas, dt, seed + i).z).p_value);
    }
    r.median_low = median(r.p_low);
    r.median_high = median(r.p_high);
    return r;
}

namespace detail {

struct BlockSums {
    BlockScheme scheme;
    LevelSchedule schedule;
    std::vector<CrossingCount> counts;  // over [0, horizon]
    std::vector<double> small;          // sum_k Y_k over short blocks
    std::vector<double> whole;          // same with J_k replaced by I_k u J_k
};

inline BlockSums block_sums(const CovarianceModel& model, double T, double gamma, double b, double c, double mu,
                            std::size_t replicas, double dt, std::uint64_t seed) {
    if (replicas < 100) throw ConfigurationError("blocks: needs at least 100 replicas");
    BlockSums out;
    out.schedule = level_schedule(T, gamma);
    out.scheme = block_scheme(T, gamma, b, c, mu);
    const double u = out.schedule.u_T;
    const double step = resolve_dt(dt, u);
    const double L = out.scheme.horizon();
    const CirculantSampler sampler(model, L, step);

    std::vector<std::size_t> i_lo, j_lo, j_hi;
    for (std::size_t k = 0; k < out.scheme.n_T; ++k) {
        i_lo.push_back(grid_index(out.scheme.I_blocks[k].lo, step));
        j_lo.push_back(std::min(grid_index(out.scheme.J_blocks[k].lo, step), sampler.intervals()));
        j_hi.push_back(std::min(grid_index(out.scheme.J_blocks[k].hi, step), sampler.intervals()));
    }
    const double C = crossing_intensity(u);
    const double scale = std::sqrt(2.0 * out.schedule.lambda_T);
    const double n = static_cast<double>(out.scheme.n_T);
    const double small_center = n * out.scheme.q_T * C;
    const double whole_center = L * C;

    out.counts.resize(replicas);
    out.small.resize(replicas);
    out.whole.resize(replicas);
    for_each_path(sampler, seed, replicas, [&](std::size_t id, std::span<const double> v) {
        std::int64_t short_total = 0, long_total = 0;
        for (std::size_t k = 0; k < out.scheme.n_T; ++k) {
            long_total += count_crossings(v, u, i_lo[k], j_lo[k]).N;
            short_total += count_crossings(v, u, j_lo[k], j_hi[k]).N;
        }
        const CrossingCount all = count_crossings(v, u);
        if (short_total + long_total != all.N)
            throw NumericalError("blocks: block counts do not add up to the count over the union");
        out.counts[id] = all;
        out.small[id] = (static_cast<double>(short_total) - small_center) / scale;
        out.whole[id] = (static_cast<double>(all.N) - whole_center) / scale;
    });
    for (std::size_t i = 0; i < replicas; ++i) require_structural_law(out.counts[i], i);
    return out;
}

inline Estimate second_moment(std::span<const double> x) {
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
    const SampleMoments m = sample_moments(sq);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(sq.size()))};
}

}  // namespace detail

/// Monte Carlo estimate of E(sum_k Y_k)^2 over the short blocks.
inline double small_block_mass(const CovarianceModel& model, double T, double gamma, double b, double c,
                               std::size_t replicas, double dt, std::uint64_t seed, double mu = 10.0) {
    return detail::second_moment(detail::block_sums(model, T, gamma, b, c, mu, replicas, dt, seed).small).value;
}

inline ExperimentReport run_block_experiment(const CovarianceModel& model, double T, double gamma, double b, double c,
                                             double mu, std::size_t replicas, double dt, std::uint64_t seed) {
    detail::require_conditions(model);
    const detail::BlockSums s = detail::block_sums(model, T, gamma, b, c, mu, replicas, dt, seed);
    const Estimate small = detail::second_moment(s.small);
    const Estimate whole = detail::second_moment(s.whole);

    ExperimentReport rep;
    rep.kind = ExperimentKind::blocks;
    rep.seed = seed;
    rep.extra_columns = {"small_block_sum", "whole_block_sum"};
    std::int64_t worst = 0;
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
        rep.replicas.push_back({i, s.counts[i].N, s.counts[i].U, {s.small[i], s.whole[i]}});
        worst = std::max(worst, std::abs(s.counts[i].N - 2 * s.counts[i].U));
    }
    rep.statistics = {{"u_T", s.schedule.u_T},
                      {"lambda_T", s.schedule.lambda_T},
                      {"small_block_mass", small.value},
                      {"small_block_mass_se", small.se},
                      {"whole_block_mass", whole.value},
                      {"whole_block_mass_se", whole.se},
                      {"max_abs_n_minus_2u", static_cast<double>(worst)}};
    rep.audit = block_audit(s.scheme);
    rep.audit.insert(rep.audit.end(), {{"gamma", gamma}, {"b", b}, {"c", c}, {"mu", mu}});
    return rep;
}

/// Up-crossings over T = ell / (C(u) / 2), compared with Poisson(ell).
inline ExperimentReport run_poisson_experiment(const CovarianceModel& model, double ell, double u,
                                               std::size_t replicas, double dt, std::uint64_t seed) {
    detail::require_conditions(model);
    if (!(ell > 0.0) || !std::isfinite(ell)) throw ConfigurationError("poisson: ell must be positive");
    if (replicas < 100) throw ConfigurationError("poisson: needs at least 100 replicas");
    const double T = 2.0 * ell / crossing_intensity(u);
    if (!(T >= 10.0) || !std::isfinite(T))
        throw ConfigurationError("poisson: horizon 2 ell / C(u) = " + std::to_string(T) + " must be >= 10");

    const CirculantSampler sampler(model, T, detail::resolve_dt(dt, u));
    std::vector<CrossingCount> counts(replicas);
    for_each_path(sampler, seed, replicas,
                  [&](std::size_t id, std::span<const double> v) { counts[id] = count_crossings(v, u); });

    ExperimentReport rep;
    rep.kind = ExperimentKind::poisson;
    rep.seed = seed;
    std::vector<std::int64_t> ups(replicas);
    std::vector<double> upd(replicas);
    std::int64_t worst = 0;
    for (std::size_t i = 0; i < replicas; ++i) {
        detail::require_structural_law(counts[i], i);
        ups[i] = counts[i].U;
        upd[i] = static_cast<double>(counts[i].U);
        worst = std::max(worst, std::abs(counts[i].N - 2 * counts[i].U));
        rep.replicas.push_back({i, counts[i].N, counts[i].U, {}});
    }
    const std::vector<double> hist = histogram(ups);
    const SampleMoments m = sample_moments(upd);
    rep.statistics = {{"T", T},
                      {"tv_distance", tv_distance(hist, ell)},
                      {"mean_U", m.mean},
                      {"mean_U_se", std::sqrt(m.variance / static_cast<double>(replicas))},
                      {"variance_U", m.variance},
                      {"max_abs_n_minus_2u", static_cast<double>(worst)}};

    const boost::math::poisson_distribution<double> law(ell);
    Column k{"k", {}}, emp{"empirical_pmf", {}}, pois{"poisson_pmf", {}};
    for (std::size_t i = 0; i < hist.size(); ++i) {
        k.values.push_back(static_cast<double>(i));
        emp.values.push_back(hist[i] / static_cast<double>(replicas));
        pois.values.push_back(boost::math::pdf(law, static_cast<double>(i)));
    }
    rep.plots = {{"empirical_pmf", k.values, emp.values}, {"poisson_pmf", k.values, pois.values}};
    rep.table = {std::move(k), std::move(emp), std::move(pois)};
    return rep;
}

}  // namespace levelcross
