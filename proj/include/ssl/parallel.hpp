#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ssl {

inline unsigned default_thread_count() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// Static block split of [0, count) across nthreads. Each worker touches a
// disjoint index range, so results never depend on scheduling order.
template <typename Fn>
void parallel_for(std::size_t count, unsigned nthreads, Fn&& fn) {
    if (nthreads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    nthreads = std::min<std::size_t>(nthreads, count);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    const std::size_t chunk = (count + nthreads - 1) / nthreads;
    for (unsigned t = 0; t < nthreads; ++t) {
        const std::size_t lo = std::size_t(t) * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace ssl
