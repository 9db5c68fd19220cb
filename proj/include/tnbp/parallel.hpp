#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tnbp {

inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{1};
    return cap;
}

inline void set_thread_cap(int n) { thread_cap() = std::max(1, n); }

// Runs f(i) for i in [0, n) on up to thread_cap() workers. Each index writes
// its own slot, so results do not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers = std::min<std::size_t>(thread_cap().load(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
                next = n;
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace tnbp
