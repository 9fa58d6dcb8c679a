#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nullaudit::parallel {

// Hardware concurrency, at least 1. NULLAUDIT_WORKERS overrides.
std::size_t default_workers();

// Runs body(i) for i in [0, n) on up to `workers` threads. Work is claimed from a
// shared counter; callers write results into slot i, so the outcome does not
// depend on scheduling. The exception from the lowest failing index is rethrown.
template <class Body>
void for_each_index(std::size_t n, std::size_t workers, Body&& body) {
    if (workers == 0) workers = default_workers();
    if (workers > n) workers = n;
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lk(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace nullaudit::parallel
