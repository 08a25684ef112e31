#include "xmc/parallel.hpp"

#include <atomic>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace xmc {

static std::atomic<int> g_workers{0}; // 0 = uninitialized

int default_workers() {
    if (const char* env = std::getenv("PLT_XMC_WORKERS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int workers() {
    int n = g_workers.load(std::memory_order_relaxed);
    if (n == 0) {
        n = default_workers();
        g_workers.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_workers(int n) { g_workers.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

int current_worker() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

namespace detail {

void parallel_for_impl(int64_t n, int nthreads, void* ctx, void (*body)(void*, int64_t)) {
    if (nthreads <= 1 || n < 2) {
        for (int64_t i = 0; i < n; ++i) body(ctx, i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (int64_t i = 0; i < n; ++i) body(ctx, i);
#else
    for (int64_t i = 0; i < n; ++i) body(ctx, i);
#endif
}

} // namespace detail
} // namespace xmc
