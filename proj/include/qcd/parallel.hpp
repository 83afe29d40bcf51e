#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qcd {

inline int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(trial_index) for every index in [0, n_trials). Each trial derives
// its own RNG from the trial index, and results go into per-trial slots, so
// the outcome is identical for any thread count. The first worker exception
// is rethrown on the calling thread.
template <typename Fn>
void parallel_for_trials(std::int64_t n_trials, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n_trials < 2) {
        for (std::int64_t i = 0; i < n_trials; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_trials || failed.load(std::memory_order_relaxed)) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    pool.clear();  // join
    if (error) std::rethrow_exception(error);
}

}  // namespace qcd
