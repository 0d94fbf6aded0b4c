#pragma once

#include <cmath>
#include <cstdint>

namespace gnav {

// splitmix64 finalizer. Used both as a seed expander and to derive
// independent sub-stream keys from (seed, tag, index...) tuples.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_key(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ (0x9e3779b97f4a7c15ULL + b)); }

inline uint64_t mix_key(uint64_t a, uint64_t b, uint64_t c) { return mix_key(mix_key(a, b), c); }

inline uint64_t mix_key(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
    return mix_key(mix_key(a, b, c), d);
}

inline uint64_t mix_key(uint64_t a, uint64_t b, uint64_t c, uint64_t d, uint64_t e) {
    return mix_key(mix_key(a, b, c, d), e);
}

// xoshiro256**. Hand-rolled (with explicit uniform/normal transforms below)
// so every sampled stream is fully specified and byte-reproducible across
// platforms and standard library versions.
class RngStream {
  public:
    RngStream() : RngStream(0) {}

    explicit RngStream(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint32_t uniform_int(uint32_t n) {
        if (n <= 1) {
            next_u64();  // keep the draw count independent of n
            return 0;
        }
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return static_cast<uint32_t>(v % n);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller. One value per call; consumes two
    // uniforms, no cached state.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
};

}  // namespace gnav
