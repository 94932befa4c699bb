#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace twsbm {

/// Hardware concurrency, at least 1.
inline int default_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

/// Runs task(i) for i in [0, count) on up to `threads` workers. Each index is
/// run exactly once; the exception thrown by task i (if any) lands in slot i.
inline std::vector<std::exception_ptr> parallel_for(int count, int threads,
                                                    const std::function<void(int)>& task) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(count, 0)));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(threads, 1, std::max(count, 1));
    if (workers == 1) {
        worker();
        return errors;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();  // joins
    return errors;
}

}  // namespace twsbm
