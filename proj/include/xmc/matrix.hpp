#pragma once

#include <cstdint>
#include <vector>

namespace xmc {

// Row-major dense matrix; the only linear-algebra container the scorer needs.
template <typename T>
struct Mat {
    int64_t rows = 0, cols = 0;
    std::vector<T> a;

    void assign(int64_t r, int64_t c, T fill = T(0)) {
        rows = r;
        cols = c;
        a.assign(static_cast<size_t>(r * c), fill);
    }
    T* row(int64_t r) { return a.data() + r * cols; }
    const T* row(int64_t r) const { return a.data() + r * cols; }
    T& operator()(int64_t r, int64_t c) { return a[static_cast<size_t>(r * cols + c)]; }
    T operator()(int64_t r, int64_t c) const { return a[static_cast<size_t>(r * cols + c)]; }
    bool empty() const { return a.empty(); }
};

} // namespace xmc
