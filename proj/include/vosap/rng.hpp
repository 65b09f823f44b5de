#pragma once

#include <cmath>
#include <cstdint>

namespace vosap {

/// splitmix64 step: advances the state and returns the next value.
/// Used both for seed expansion and for hash-style sub-seed derivation so
/// that every random stream in an experiment is a pure function of the
/// experiment seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return splitmix64(s);
}

/// Derives an independent sub-seed from a base seed and up to three tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0x5be5u, std::uint64_t c = 0xc0deu) {
    return mix_seed(mix_seed(mix_seed(base, a), b), c);
}

/// xoshiro256** generator. Seeded through splitmix64 per the reference
/// recommendation; output sequence is identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased-enough bounded integer (Lemire reduction); deterministic.
    std::uint32_t uniform_index(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per pair and
    /// caches the second, so the draw sequence is fixed per stream.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vosap
