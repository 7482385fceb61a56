#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pmrank {

inline int& thread_limit_ref() {
    static int limit = 0;  // 0 = hardware concurrency
    return limit;
}

inline void set_thread_limit(int n) { thread_limit_ref() = n; }

inline int effective_threads() {
    const int limit = thread_limit_ref();
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    int n = limit > 0 ? limit : (hw > 0 ? hw : 1);
    return n < 1 ? 1 : n;
}

inline bool& in_parallel_region() {
    thread_local bool inside = false;
    return inside;
}

// Index-parallel loop. Work items write to disjoint slots keyed by index, so
// results are identical for any thread count; no reduction happens here.
// Nested calls run serially to avoid oversubscription.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    const int threads = in_parallel_region() ? 1 : std::min(effective_threads(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            in_parallel_region() = true;
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace pmrank
