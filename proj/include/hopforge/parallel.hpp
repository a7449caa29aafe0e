#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "hopforge/errors.hpp"

namespace hopforge {

// Runs fn(i) for i in [0, n) across at most `workers` threads, pulling
// indices from a shared counter. The first exception aborts remaining work
// and is rethrown on the calling thread. Callers are responsible for making
// fn's side effects order-independent.
inline void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (n == 0) return;
    const size_t num_threads = std::min(static_cast<size_t>(workers), n);
    if (num_threads == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto work = [&]() {
        while (!stop.load(std::memory_order_relaxed)) {
            const size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
                stop.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(num_threads);
    for (size_t t = 0; t < num_threads; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace hopforge
