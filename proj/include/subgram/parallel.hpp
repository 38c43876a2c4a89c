// Deterministic data-parallel helper. Work is split into fixed-size chunks
// (grain independent of thread count), chunk results are reduced in index
// order, so outputs are bit-identical for any SUBGRAM_THREADS setting.
#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace subgram {

inline unsigned thread_width() {
    if (const char* env = std::getenv("SUBGRAM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// chunk_fn(lo, hi) -> R computed sequentially over [lo, hi);
// merge(acc, part) folds chunk results in chunk order.
template <typename R, typename ChunkFn, typename MergeFn>
R parallel_map_reduce(std::size_t n, std::size_t grain, R init, ChunkFn chunk_fn, MergeFn merge) {
    if (n == 0) return init;
    if (grain == 0) grain = 1;
    const std::size_t num_chunks = (n + grain - 1) / grain;
    const unsigned width = std::min<std::size_t>(thread_width(), num_chunks);

    if (width <= 1) {
        R acc = std::move(init);
        for (std::size_t c = 0; c < num_chunks; ++c) {
            const std::size_t lo = c * grain;
            const std::size_t hi = std::min(n, lo + grain);
            merge(acc, chunk_fn(lo, hi));
        }
        return acc;
    }

    std::vector<R> results(num_chunks, init);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t c = next.fetch_add(1);
            if (c >= num_chunks) break;
            const std::size_t lo = c * grain;
            const std::size_t hi = std::min(n, lo + grain);
            results[c] = chunk_fn(lo, hi);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(width);
    for (unsigned i = 0; i < width; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    R acc = std::move(init);
    for (std::size_t c = 0; c < num_chunks; ++c) merge(acc, std::move(results[c]));
    return acc;
}

} // namespace subgram
