#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qlb {

inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Run f(begin, end) on contiguous chunks of [0, n) across `workers`
/// threads.  Chunking is static, so the work split is a pure function of
/// (n, workers); determinism of results is up to the caller (each index
/// should write only its own outputs).
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
    const int w = std::min<std::size_t>(resolve_workers(workers), n == 0 ? 1 : n);
    if (n == 0) return;
    if (w <= 1) {
        f(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(w);
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + w - 1) / w;
    for (int t = 0; t < w; ++t) {
        const std::size_t begin = std::min(n, static_cast<std::size_t>(t) * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
            try {
                f(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace qlb
