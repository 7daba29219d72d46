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
 * @file simulate.hpp
 * @brief Exact grid sampling by circulant embedding and crossing counts.
 *
 * The covariance sequence r(j dt), j = 0..M, is embedded in a symmetric
 * circulant of size P (a power of two >= 4M). With eigenvalues lambda_k of
 * the circulant and a complex standard normal vector xi, the real and
 * imaginary parts of FFT(sqrt(lambda / P) xi) are two independent draws
 * with covariance r(|i - j| dt). Replicas 2p and 2p + 1 are the two parts of
 * pair p; the normals of pair p come from the Philox stream p, so a replica
 * depends only on (seed, replica_id).
 */

#pragma once

#include "levelcross/covariance.hpp"
#include "levelcross/detail/numeric.hpp"
#include "levelcross/errors.hpp"
#include "levelcross/parallel.hpp"
#include "levelcross/philox.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace levelcross {

struct PathGrid {
    double dt = 0.0;
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::uint64_t replica_id = 0;
};

struct CrossingCount {
    std::int64_t N = 0;  // crossings of u
    std::int64_t U = 0;  // up-crossings of u
    bool operator==(const CrossingCount&) const = default;
};

/// min(0.01, 0.1 / max(u, 1)).
inline double default_dt(double u) { return std::min(0.01, 0.1 / std::max(std::abs(u), 1.0)); }

/// Number of grid intervals covering [0, T]: ceil(T / dt), ignoring rounding
/// noise in T / dt.
inline std::size_t grid_intervals(double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("grid: dt must be positive and finite");
    if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("grid: T must be finite and >= 0");
    const double q = T / dt;
    const double r = std::round(q);
    return static_cast<std::size_t>(std::abs(q - r) <= 1e-9 * std::max(1.0, q) ? r : std::ceil(q));
}

/// Crossings on the cells [begin, end) of a grid path, cell i joining
/// values[i] and values[i + 1]. A cell crosses when the state
/// (value >= u) changes; it up-crosses when values[i] < u <= values[i + 1].
/// Counts over disjoint cell ranges add up to the count over their union.
inline CrossingCount count_crossings(std::span<const double> values, double u, std::size_t begin, std::size_t end) {
    CrossingCount c;
    if (values.size() < 2) return c;
    end = std::min(end, values.size() - 1);
    for (std::size_t i = begin; i < end; ++i) {
        const bool a = values[i] >= u, b = values[i + 1] >= u;
        if (a != b) {
            ++c.N;
            if (b) ++c.U;
        }
    }
    return c;
}

inline CrossingCount count_crossings(std::span<const double> values, double u) {
    return count_crossings(values, u, 0, values.empty() ? 0 : values.size() - 1);
}

inline CrossingCount count_crossings(const PathGrid& path, double u) { return count_crossings(path.values, u); }

namespace detail {

// The FFTW planner is not thread-safe; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

inline FftwBuffer make_fftw_buffer(std::size_t n) {
    auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer(p);
}

}  // namespace detail

class CirculantSampler {
public:
    static constexpr double default_eig_tol = 1e-8;
    static constexpr int max_padding_doublings = 4;

    /// Per-thread scratch buffer.
    class Workspace {
    public:
        explicit Workspace(std::size_t n) : buf_(detail::make_fftw_buffer(n)) {}
        fftw_complex* data() noexcept { return buf_.get(); }

    private:
        detail::FftwBuffer buf_;
    };

    CirculantSampler(const CovarianceModel& model, double T, double dt, double eig_tol = default_eig_tol)
        : dt_(dt), intervals_(grid_intervals(T, dt)) {
        if (!(eig_tol >= 0.0)) throw DomainError("sampler: eig_tol must be non-negative");
        padded_ = 8;
        while (padded_ < 4 * std::max<std::size_t>(intervals_, 1)) padded_ *= 2;

        // Short horizons can leave too little room for the covariance to
        // decay inside the embedding; double the padding a few times first.
        Workspace ws(padded_ << max_padding_doublings);
        for (int attempt = 0;; ++attempt) {
            {
                std::lock_guard lock(detail::fftw_planner_mutex());
                plan_ = fftw_plan_dft_1d(static_cast<int>(padded_), ws.data(), ws.data(), FFTW_FORWARD,
                                         FFTW_ESTIMATE);
            }
            if (!plan_) throw NumericalError("sampler: FFT planning failed");

            fftw_complex* c = ws.data();
            for (std::size_t j = 0; j < padded_; ++j) {
                const std::size_t lag = std::min(j, padded_ - j);
                c[j][0] = model.r(static_cast<double>(lag) * dt_);
                c[j][1] = 0.0;
            }
            fftw_execute_dft(plan_, c, c);

            double max_eig = 0.0;
            min_eig_ = c[0][0];
            for (std::size_t k = 0; k < padded_; ++k) {
                max_eig = std::max(max_eig, c[k][0]);
                min_eig_ = std::min(min_eig_, c[k][0]);
            }
            if (min_eig_ >= -eig_tol * max_eig) break;
            if (attempt == max_padding_doublings) {
                destroy_plan();
                throw NonEmbeddableError("sampler: circulant embedding of size " + std::to_string(padded_) +
                                             " has eigenvalue " + std::to_string(min_eig_) +
                                             "; use a longer padded length or a coarser grid",
                                         min_eig_);
            }
            destroy_plan();
            padded_ *= 2;
        }
        fftw_complex* c = ws.data();
        scale_.resize(padded_);
        const double inv_p = 1.0 / static_cast<double>(padded_);
        for (std::size_t k = 0; k < padded_; ++k) {
            if (c[k][0] < 0.0) ++clipped_;
            scale_[k] = std::sqrt(std::max(c[k][0], 0.0) * inv_p);
        }
    }

    CirculantSampler(const CirculantSampler&) = delete;
    CirculantSampler& operator=(const CirculantSampler&) = delete;
    ~CirculantSampler() { destroy_plan(); }

    double dt() const noexcept { return dt_; }
    std::size_t intervals() const noexcept { return intervals_; }
    std::size_t points() const noexcept { return intervals_ + 1; }
    std::size_t padded_length() const noexcept { return padded_; }
    double min_eigenvalue() const noexcept { return min_eig_; }
    std::size_t clipped_eigenvalues() const noexcept { return clipped_; }

    Workspace make_workspace() const { return Workspace(padded_); }

    /// Replicas 2 pair_id and 2 pair_id + 1; each output span holds points().
    void sample_pair(std::uint64_t seed, std::uint64_t pair_id, Workspace& ws, std::span<double> first,
                     std::span<double> second) const {
        fftw_complex* buf = ws.data();
        for (std::size_t k = 0; k < padded_; ++k) {
            const auto [g1, g2] = normal_pair(seed, pair_id, k);
            buf[k][0] = scale_[k] * g1;
            buf[k][1] = scale_[k] * g2;
        }
        fftw_execute_dft(plan_, buf, buf);
        const std::size_t n = points();
        for (std::size_t j = 0; j < n && j < first.size(); ++j) first[j] = buf[j][0];
        for (std::size_t j = 0; j < n && j < second.size(); ++j) second[j] = buf[j][1];
    }

    PathGrid sample(std::uint64_t seed, std::uint64_t replica_id) const {
        Workspace ws = make_workspace();
        std::vector<double> a(points()), b(points());
        sample_pair(seed, replica_id / 2, ws, a, b);
        return PathGrid{dt_, replica_id % 2 == 0 ? std::move(a) : std::move(b), seed, replica_id};
    }

private:
    void destroy_plan() noexcept {
        if (!plan_) return;
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        plan_ = nullptr;
    }

    double dt_;
    std::size_t intervals_;
    std::size_t padded_ = 0;
    fftw_plan plan_ = nullptr;
    std::vector<double> scale_;
    double min_eig_ = 0.0;
    std::size_t clipped_ = 0;
};

/// One exact draw on the grid {0, dt, ..., ceil(T/dt) dt}.
inline PathGrid sample_path(const CovarianceModel& model, double T, double dt, std::uint64_t seed,
                            std::uint64_t replica_id) {
    return CirculantSampler(model, T, dt).sample(seed, replica_id);
}

/// Calls fn(replica_id, values) for every replica in [0, replicas), fanned
/// across workers by pairs. fn must only touch per-replica state.
template <class Fn>
void for_each_path(const CirculantSampler& sampler, std::uint64_t seed, std::size_t replicas, Fn&& fn,
                   unsigned workers = worker_count()) {
    struct State {
        CirculantSampler::Workspace ws;
        std::vector<double> a, b;
    };
    const std::size_t pairs = (replicas + 1) / 2;
    parallel_for_each(
        pairs,
        [&] { return State{sampler.make_workspace(), std::vector<double>(sampler.points()),
                           std::vector<double>(sampler.points())}; },
        [&](State& st, std::size_t p) {
            sampler.sample_pair(seed, p, st.ws, st.a, st.b);
            fn(2 * p, std::span<const double>(st.a));
            if (2 * p + 1 < replicas) fn(2 * p + 1, std::span<const double>(st.b));
        },
        workers);
}

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct McMoments {
    std::size_t replicas = 0;
    Estimate mean;
    Estimate variance;
    Estimate second_factorial;  // E N(N - 1)
    Estimate third_factorial;   // E N(N - 1)(N - 2)
    Estimate ratio;             // variance / mean, delta-method standard error
    std::int64_t max_abs_n_minus_2u = 0;
    std::vector<CrossingCount> counts;
};

/// Sample statistics of N over per-replica counts, reduced in replica order.
inline McMoments summarize_counts(std::vector<CrossingCount> counts) {
    McMoments m;
    const std::size_t n = counts.size();
    m.replicas = n;
    if (n < 2) throw DomainError("summarize_counts: need at least two replicas");
    const double dn = static_cast<double>(n);

    detail::CompensatedSum s1, f2, f3;
    for (const auto& c : counts) {
        const double x = static_cast<double>(c.N);
        s1 += x;
        f2 += x * (x - 1.0);
        f3 += x * (x - 1.0) * (x - 2.0);
        m.max_abs_n_minus_2u = std::max(m.max_abs_n_minus_2u, std::abs(c.N - 2 * c.U));
    }
    const double mean = s1.value() / dn;
    detail::CompensatedSum c2, c4, d2, d3;
    for (const auto& c : counts) {
        const double x = static_cast<double>(c.N);
        const double d = x - mean;
        c2 += d * d;
        c4 += d * d * d * d;
        const double g2 = x * (x - 1.0) - f2.value() / dn;
        const double g3 = x * (x - 1.0) * (x - 2.0) - f3.value() / dn;
        d2 += g2 * g2;
        d3 += g3 * g3;
    }
    const double var = c2.value() / (dn - 1.0);
    const double mu2 = c2.value() / dn, mu4 = c4.value() / dn;
    m.mean = {mean, std::sqrt(var / dn)};
    m.variance = {var, std::sqrt(std::max(mu4 - mu2 * mu2, 0.0) / dn)};
    m.second_factorial = {f2.value() / dn, std::sqrt(d2.value() / (dn - 1.0) / dn)};
    m.third_factorial = {f3.value() / dn, std::sqrt(d3.value() / (dn - 1.0) / dn)};

    if (mean > 0.0) {
        // Influence function of var / mean.
        const double ratio = var / mean;
        detail::CompensatedSum ifs;
        for (const auto& c : counts) {
            const double d = static_cast<double>(c.N) - mean;
            const double inf = (d * d - mu2) / mean - ratio / mean * d;
            ifs += inf * inf;
        }
        m.ratio = {ratio, std::sqrt(ifs.value() / (dn - 1.0) / dn)};
    }
    m.counts = std::move(counts);
    return m;
}

/// Monte Carlo moments of N(T, u) over `replicas` exact grid paths.
inline McMoments mc_moments(const CovarianceModel& model, double T, double u, double dt, std::size_t replicas,
                            std::uint64_t seed) {
    if (replicas < 100) throw DomainError("mc_moments: need at least 100 replicas");
    if (!std::isfinite(u)) throw DomainError("mc_moments: level must be finite");
    const CirculantSampler sampler(model, T, dt);
    std::vector<CrossingCount> counts(replicas);
    for_each_path(sampler, seed, replicas,
                  [&](std::size_t id, std::span<const double> v) { counts[id] = count_crossings(v, u); });
    return summarize_counts(std::move(counts));
}

}  // namespace levelcross
