#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace qoct {

// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
// handled by exactly one call, so outputs written per index are
// deterministic regardless of the thread count.
template <class F>
void parallel_for(std::size_t n, F&& body, int threads = 0) {
    std::size_t t = threads > 0 ? static_cast<std::size_t>(threads)
                                : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    t = std::min(t, std::max<std::size_t>(1, n / 64));
    if (t <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    const std::size_t chunk = (n + t - 1) / t;
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t b = k * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, b, e, k] {
            try {
                body(b, e);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& ep : errors)
        if (ep) std::rethrow_exception(ep);
}

}  // namespace qoct
