#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

#include "radisynth/geom.hpp"

namespace radisynth {

// splitmix64 step; also used as a mixing/hash function.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a33a8c6b2c5dULL + 0x2545f4914f6cdd1dULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ULL + 0x1d8e4e27c47d124fULL);
    splitmix64(s);
    return splitmix64(s);
}

inline std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Small deterministic generator, identical across platforms and build modes.
// All randomness in the library flows through this type so results are
// reproducible from the recorded seeds alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
    }

    // labeled sub-stream (e.g. rng.sub("noise"))
    Rng sub(std::string_view label) const {
        return Rng(mix64(state_, hash_label(label)));
    }
    Rng sub(std::uint64_t index) const { return Rng(mix64(state_, index)); }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) {
        return n ? next_u64() % n : 0;
    }

    // standard normal, Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    // Poisson via inversion for small lambda, normal approx for large
    int poisson(double lambda) {
        if (lambda <= 0) return 0;
        if (lambda < 60.0) {
            double l = std::exp(-lambda), p = 1.0;
            int k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > l);
            return k - 1;
        }
        double v = lambda + std::sqrt(lambda) * normal();
        return v < 0 ? 0 : static_cast<int>(std::lround(v));
    }

    template <typename T>
    void shuffle(T& seq) {
        for (std::size_t i = seq.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(seq[i - 1], seq[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0;
    bool have_spare_ = false;
};

// Stateless per-index normal sample: used for per-pixel noise so that the
// result is independent of pixel evaluation order and thread count.
inline double normal_at(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = mix64(seed, index);
    double u1 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

} // namespace radisynth
