#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace twinfal {

// Counter-based random streams. Every stream is a pure function of its key and
// a draw counter, so distinct (seed, index) pairs can be consumed from any
// thread in any order and still reproduce byte-identical data. No global state,
// no implementation-defined <random> distributions.

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Fold an ordered tuple of integers into one stream key.
inline std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t key = 0x6A09E667F3BCC909ull;
    for (std::uint64_t p : parts) {
        key = mix64((key + kGoldenGamma) ^ mix64(p + kGoldenGamma));
    }
    return key;
}

// Seeds handed to external twins travel through JSON; 53 bits survive any
// parser that stores integers as doubles.
inline constexpr std::uint64_t kWireSeedMask = (1ull << 53) - 1;

inline std::uint64_t wire_seed(std::uint64_t master_seed, std::uint64_t request_id) {
    return derive_key({master_seed, request_id}) & kWireSeedMask;
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGoldenGamma); }

    // Uniform on [0, 1), 53 bits of mantissa.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire's multiply-then-reject, unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        __extension__ using uint128 = unsigned __int128;
        std::uint64_t x = next_u64();
        uint128 m = static_cast<uint128>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<uint128>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; the pair is cached so draws stay aligned
    // with the counter sequence.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        // Guard u1 = 0; 0x1.0p-54 keeps log() finite without biasing anything visible.
        if (u1 <= 0.0) u1 = 0x1.0p-54;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace twinfal
