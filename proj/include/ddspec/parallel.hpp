#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ddspec {

inline unsigned resolve_threads(unsigned requested) { return requested == 0 ? 1u : requested; }

// Static interleave of [0, count) over workers: worker w handles w, w+threads, ...
// The index -> worker assignment is fixed, so writes to per-index slots are
// race-free and results cannot depend on scheduling. fn must not throw.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&fn, w, count, threads] {
            for (std::size_t i = w; i < count; i += threads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Fixed block size for parallel reductions: partial sums are formed per block
// and folded in block order, so totals are bit-identical for any thread count.
inline constexpr std::size_t kReductionBlock = 4096;

}  // namespace ddspec
