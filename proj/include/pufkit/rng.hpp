#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace pufkit::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (full 64-bit avalanche).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Domain tags keep unrelated draw families on disjoint streams even when the
// remaining key fields coincide.
enum class Domain : std::uint64_t {
    process_deviation = 0x70726f63,  // "proc"
    measurement_noise = 0x6e6f6973,  // "nois"
    pair_matching     = 0x6d617463,  // "matc"
    info_bits         = 0x696e666f,  // "info"
    challenge         = 0x6368616c,  // "chal"
};

// Collapses (seed, domain, fields...) into a single stream key.
inline std::uint64_t stream_key(std::uint64_t seed, Domain domain,
                                std::initializer_list<std::uint64_t> fields) {
    std::uint64_t h = mix64(seed + kGolden);
    h = mix64(h ^ mix64(static_cast<std::uint64_t>(domain) + kGolden));
    for (std::uint64_t v : fields) {
        h = mix64(h ^ mix64(v + kGolden));
    }
    return h;
}

// Counter-based deterministic stream: the key fixes the whole sequence, so no
// generator state has to be stored to reproduce an experiment.
class Stream {
public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix64(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). Modulo bias is < 2^-32 for the bounds
    // used here (oscillator counts).
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

    bool next_bit() { return (next_u64() & 1) != 0; }

    // One standard normal draw (Box-Muller, cosine branch).
    double next_normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

// Single keyed normal draw.
inline double keyed_normal(std::uint64_t key) {
    return Stream(key).next_normal();
}

}  // namespace pufkit::rng
