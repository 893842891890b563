#pragma once

// Plane-sliced parallel loop. Reductions accumulate per-slice partials that
// are combined in slice order, so results do not depend on the thread count.

#include <algorithm>
#include <thread>
#include <vector>

namespace tanharm {

inline int& worker_threads() {
    static int n = 1;
    return n;
}

template <class F>
inline void parallel_for(int begin, int end, F&& body) {
    int nthreads = std::min(worker_threads(), end - begin);
    if (nthreads <= 1) {
        for (int i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(size_t(nthreads));
    int chunk = (end - begin + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
        int lo = begin + t * chunk;
        int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body]() {
            for (int i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Sum of per-slice partial values, combined in slice order.
template <class F>
inline double parallel_plane_sum(int planes, F&& plane_value) {
    std::vector<double> partial(size_t(planes), 0.0);
    parallel_for(0, planes, [&](int k) { partial[size_t(k)] = plane_value(k); });
    double s = 0.0;
    for (double v : partial) s += v;
    return s;
}

}  // namespace tanharm
