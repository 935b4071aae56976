#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace idfalign {

/// Worker count for data-parallel loops. 0 means hardware concurrency.
struct ExecutionOptions
{
    unsigned threads = 0;

    unsigned resolved() const
    {
        if (threads != 0)
            return threads;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Calls fn(i) for i in [0, n). Each index is visited exactly once; results
/// must be written to per-index slots so output is independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, const ExecutionOptions& exec, Fn&& fn)
{
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(exec.resolved(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (unsigned w = 1; w < workers; ++w)
            pool.emplace_back(body);
        body();
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace idfalign
