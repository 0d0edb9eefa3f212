#ifndef PATHINT_PARALLEL_HPP
#define PATHINT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pathint {

// Worker count: PATHINT_THREADS env var if set, else hardware concurrency.
// Affects speed only; outputs are identical for any value.
inline unsigned worker_count() {
    static unsigned n = [] {
        if (const char* env = std::getenv("PATHINT_THREADS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<unsigned>(v);
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? hw : 1u;
    }();
    return n;
}

namespace detail {
inline thread_local bool inside_pool = false;
}

// Runs fn(begin, end) over fixed-size chunks of [0, count). Chunk boundaries
// depend only on count and chunk, never on the worker count, and workers
// write to disjoint state, so results are identical for any thread count.
// Nested calls run inline on the calling worker.
template <typename Fn>
void parallel_for_chunks(std::size_t count, std::size_t chunk, Fn&& fn) {
    if (count == 0) return;
    std::size_t nchunks = (count + chunk - 1) / chunk;
    unsigned workers = worker_count();
    if (detail::inside_pool || nchunks == 1 || workers <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            fn(c * chunk, std::min(count, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto work = [&] {
        detail::inside_pool = true;
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= nchunks) break;
            try {
                fn(c * chunk, std::min(count, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
        detail::inside_pool = false;
    };
    std::vector<std::thread> threads;
    unsigned spawn = std::min<std::size_t>(workers, nchunks) - 1;
    threads.reserve(spawn);
    for (unsigned i = 0; i < spawn; ++i) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Runs count independent tasks, fn(task_index).
template <typename Fn>
void parallel_tasks(std::size_t count, Fn&& fn) {
    parallel_for_chunks(count, 1, [&](std::size_t b, std::size_t) { fn(b); });
}

}  // namespace pathint

#endif
