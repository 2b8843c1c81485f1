#pragma once

// Deterministic random generation. All draws go through hand-rolled helpers
// on top of mt19937_64 because the std distribution objects are not
// bit-reproducible across standard library implementations.

#include <cstdint>
#include <random>
#include <vector>

namespace neuroflex {

// Mixes a stream label into a seed so substreams are independent.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Substream for a labeled purpose (per layer, per operand, ...).
    static Rng substream(std::uint64_t seed, std::uint64_t label) {
        return Rng(splitmix64(seed ^ splitmix64(label)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, bound) via rejection sampling; unbiased and portable.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) return 0;
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        next_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool next_bool(double p_true) { return next_double() < p_true; }

    // Fisher-Yates; depends only on next_below so it is portable.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace neuroflex
