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

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace levelcross {

/// Worker count: LEVELCROSS_WORKERS if set to a positive integer, otherwise
/// the hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("LEVELCROSS_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(state, i) for i in [0, n). Each worker owns one state built by
/// make_state(). Work is pulled dynamically, so callers must write results
/// into per-index slots and reduce afterwards in index order. The exception
/// from the smallest failing index is rethrown.
template <class MakeState, class Body>
void parallel_for_each(std::size_t n, MakeState&& make_state, Body&& body, unsigned workers = worker_count()) {
    if (n == 0) return;
    workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), n));
    if (workers == 1) {
        auto state = make_state();
        for (std::size_t i = 0; i < n; ++i) body(state, i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::size_t first_index = n;
    auto run = [&] {
        auto state = make_state();
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                body(state, i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < first_index) {
                    first_index = i;
                    first_error = std::current_exception();
                }
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned workers = worker_count()) {
    struct None {};
    parallel_for_each(
        n, [] { return None{}; }, [&](None&, std::size_t i) { body(i); }, workers);
}

}  // namespace levelcross
