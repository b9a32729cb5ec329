#pragma once

#include <cstdint>
#include <cmath>

namespace blindnet {

// splitmix64; stable across platforms, unlike std::uniform_* distributions.
inline uint64_t hash_mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_mix(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Deterministic counter-based RNG. A stream is fully identified by its seed,
// so sub-streams keyed by (seed, name, step) reproduce regardless of call order.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(hash_mix(seed ^ 0x5bf03635d6586b91ULL)) {}

    static Rng substream(uint64_t seed, uint64_t stream, uint64_t step = 0) {
        return Rng(hash_combine(hash_combine(seed, stream), step));
    }

    uint64_t next_u64() {
        state_ = hash_mix(state_);
        return state_;
    }

    // in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // in [0, n)
    uint64_t uniform_int(uint64_t n) { return n ? next_u64() % n : 0; }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    uint64_t state_;
};

}  // namespace blindnet
