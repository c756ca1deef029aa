#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gratis {

inline unsigned default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items are
/// handed out dynamically; the first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = 0) {
    if (workers == 0) workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace gratis
