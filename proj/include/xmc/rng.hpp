#pragma once

#include <cstdint>

namespace xmc {

// Seeded 64-bit mixing PRNG (splitmix64 update). Used for every random
// choice in the library so that identical seeds give identical output on
// every platform, which std::random distributions do not guarantee.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, n)
    uint64_t next_range(uint64_t n) { return next_u64() % n; }

    // uniform in [0, 1), 53-bit resolution
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [-bound, bound]
    double next_symmetric(double bound) { return (2.0 * next_double() - 1.0) * bound; }

private:
    uint64_t state_;
};

// Stateless mix of two words, for deriving independent child seeds
// (per tree node, per sample, per epoch) from one master seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace xmc
