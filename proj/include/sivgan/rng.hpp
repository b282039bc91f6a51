// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace sivgan {

/// splitmix64 step, used to derive independent stream seeds from a root seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

/// Independent deterministic RNG streams, re-derived per iteration so a
/// resumed run consumes exactly the same randomness as an uninterrupted one.
enum class Stream : std::uint64_t {
    init_g = 1,
    init_d = 2,
    batch = 3,
    da_real = 4,
    da_fake_d = 5,
    da_fake_g = 6,
    fa = 7,
    z_d = 8,
    z_g = 9,
    pairs = 10,
    eval = 11,
};

inline std::uint64_t stream_seed(std::uint64_t root, Stream s, std::uint64_t iter = 0) {
    return mix_seed(mix_seed(root, std::uint64_t(s)), iter);
}

/// Deterministic random stream. Distribution mapping is implemented here
/// rather than via std:: distributions so that sequences are stable across
/// standard library versions.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    void reseed(std::uint64_t seed) { engine_.seed(seed); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = std::uint64_t(hi - lo) + 1;
        return lo + std::int64_t(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller. Draws two uniforms per call; no spare
    /// is cached so the stream state stays trivially serializable.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// In-place Fisher-Yates shuffle.
    template <typename V>
    void shuffle(V& v) {
        for (std::int64_t i = std::int64_t(v.size()) - 1; i > 0; --i) {
            const auto j = uniform_int(0, i);
            std::swap(v[i], v[j]);
        }
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }
    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sivgan
