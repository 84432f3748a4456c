#pragma once

// Deterministic random number generation.
//
// Everything in this library that consumes randomness takes an explicit
// 64-bit seed and produces identical results for identical seeds on every
// platform. No std::random distribution is used anywhere (their algorithms
// are implementation-defined); all conversions from raw 64-bit draws are
// spelled out below.

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>
#include <algorithm>

namespace biasaudit {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Bijective on uint64.
inline constexpr std::uint64_t splitmix64_mix(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Per-replicate seed derivation, bit-exact:
//   h0 = mix(master + 0x9E3779B97F4A7C15)
//   h1 = mix(h0 ^ (sweep_index + 0xD1B54A32D192ED03))
//   h2 = mix(h1 ^ (replicate_index + 0x8BB84B93962EACC9))
// where mix is splitmix64_mix above and all arithmetic is mod 2^64.
// The three odd constants keep distinct (master, sweep, replicate) triples
// from colliding over any realistic grid; the test suite enumerates the
// full acceptance grid and checks for zero collisions.
inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                           std::uint64_t sweep_index,
                                           std::uint64_t replicate_index) {
    std::uint64_t h = splitmix64_mix(master_seed + 0x9E3779B97F4A7C15ULL);
    h = splitmix64_mix(h ^ (sweep_index + 0xD1B54A32D192ED03ULL));
    h = splitmix64_mix(h ^ (replicate_index + 0x8BB84B93962EACC9ULL));
    return h;
}

// SplitMix64 generator: state advances by the golden-ratio increment, output
// is the finalizer applied to the state. Small, fast, and fully specified.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix64_mix(state_);
    }

    // Uniform in [0, n), unbiased via rejection of the incomplete block.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Uniform in [0, 1): top 53 bits scaled by 2^-53.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1]; safe as a log() argument.
    double next_double_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller (cosine branch only; the sine value is
    // discarded so that call order stays trivially reproducible).
    double normal() {
        const double u1 = next_double_open();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // First m entries of a Fisher-Yates shuffle of 0..n-1, returned sorted
    // ascending so that sampled rows keep their pool order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < m && i + 1 < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(m);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Stream tags used when one logical seed has to feed several independent
// consumers (sampling vs. fitting vs. importance, etc.). Fixed here so the
// derivation chain is part of the documented output contract.
namespace seed_stream {
inline constexpr std::uint64_t kFit = 0x11;
inline constexpr std::uint64_t kImportance = 0x12;
inline constexpr std::uint64_t kCrossValidation = 0x13;
inline constexpr std::uint64_t kHoldout = 0x21;
inline constexpr std::uint64_t kRebalance = 0x22;
inline constexpr std::uint64_t kAugment = 0x23;
}  // namespace seed_stream

}  // namespace biasaudit
