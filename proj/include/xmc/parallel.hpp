#pragma once

#include <cstdint>
#include <cstdlib>

namespace xmc {

// Global worker cap. 1 means serial execution; the CLI sets it from
// --workers or PLT_XMC_WORKERS. Every parallel loop in the library writes
// disjoint outputs per index (and reductions run over fixed-size chunks in
// chunk order), so results are bitwise identical for any worker count.
int workers();
void set_workers(int n);

// Reads PLT_XMC_WORKERS, falling back to the OpenMP default.
int default_workers();

// Index of the calling worker inside a parallel_for body, in [0, workers()).
// 0 outside parallel regions; used to pick per-worker scratch buffers.
int current_worker();

namespace detail {
void parallel_for_impl(int64_t n, int nthreads, void* ctx, void (*body)(void*, int64_t));
}

// Runs body(i) for i in [0, n). Parallel when workers() > 1.
template <class F>
void parallel_for(int64_t n, F&& body) {
    struct Ctx { F* f; } ctx{&body};
    detail::parallel_for_impl(n, workers(), &ctx,
                              [](void* c, int64_t i) { (*static_cast<Ctx*>(c)->f)(i); });
}

// Serial reference lane, kept so tests and the benchmark can compare
// against the OpenMP path directly.
template <class F>
void serial_for(int64_t n, F&& body) {
    for (int64_t i = 0; i < n; ++i) body(i);
}

} // namespace xmc
