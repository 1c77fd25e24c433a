#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace carnot {

inline int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(chunk_index, begin, end) over [0, total) in fixed-size chunks.
// Chunk boundaries depend only on (total, chunk_size), never on the thread
// count, so per-chunk partial results combine to the same bits for any
// --threads setting.
inline void parallel_chunks(int64_t total, int64_t chunk_size, int threads,
                            const std::function<void(int64_t, int64_t, int64_t)>& fn) {
    if (total <= 0) return;
    if (chunk_size <= 0) chunk_size = 1;
    if (threads <= 0) threads = default_threads();
    const int64_t n_chunks = (total + chunk_size - 1) / chunk_size;
    if (threads == 1 || n_chunks == 1) {
        for (int64_t c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(total, (c + 1) * chunk_size));
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        while (true) {
            const int64_t c = next.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            try {
                fn(c, c * chunk_size, std::min(total, (c + 1) * chunk_size));
            } catch (...) {
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_workers = static_cast<int>(std::min<int64_t>(threads, n_chunks));
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace carnot
