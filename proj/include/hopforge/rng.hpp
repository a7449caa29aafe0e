#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace hopforge {

// 64-bit FNV-1a. Used for stable content hashes and seed derivation; must
// never change, since serialized artifacts embed its output.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Fixed-width lowercase hex; the rendering of every hash we persist.
inline std::string to_hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline uint64_t fnv1a64_u64(uint64_t value, uint64_t seed) {
    uint64_t h = seed;
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (i * 8)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

// splitmix64: cheap, well-distributed stream used everywhere we need
// reproducible draws. Distribution code is hand-rolled because the standard
// <random> distributions are not bit-stable across library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        // multiply-shift; bias is < 2^-64 * n, irrelevant at our scales
        unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<uint64_t>(wide >> 64);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

// Derives a child seed from a run seed and a set of labels (question id,
// hop, prompt id, ...). Order-sensitive, collision-resistant enough for
// per-sample stream separation, and independent of worker scheduling.
inline uint64_t derive_seed(uint64_t root, std::string_view label_a,
                            uint64_t index_a = 0, std::string_view label_b = {},
                            uint64_t index_b = 0) {
    uint64_t h = fnv1a64_u64(root, 0xcbf29ce484222325ull);
    h = fnv1a64(label_a, h);
    h = fnv1a64_u64(index_a, h);
    h = fnv1a64(label_b, h);
    h = fnv1a64_u64(index_b, h);
    return h;
}

} // namespace hopforge
