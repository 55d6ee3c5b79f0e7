#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace rieszlab {

/// Worker cap from RIESZLAB_THREADS, defaulting to the hardware count.
inline int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("RIESZLAB_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < hw) hw = cap;
    }
    return hw;
}

/// Static-chunked parallel loop; results must be written to preallocated,
/// per-index slots so reductions stay deterministic.
template <class F>
void parallel_for(int64_t begin, int64_t end, F&& body) {
    int64_t count = end - begin;
    if (count <= 0) return;
    int workers = worker_count();
    if (workers <= 1 || count == 1) {
        for (int64_t i = begin; i < end; ++i) body(i);
        return;
    }
    workers = static_cast<int>(std::min<int64_t>(workers, count));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        int64_t lo = begin + count * w / workers;
        int64_t hi = begin + count * (w + 1) / workers;
        pool.emplace_back([lo, hi, &body] {
            for (int64_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rieszlab
