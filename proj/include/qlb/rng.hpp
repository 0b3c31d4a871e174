#pragma once

#include <cmath>
#include <cstdint>

namespace qlb {

/// splitmix64 generator.  8 bytes of state, passes BigCrush as a mixing
/// function, and cheap enough to give every particle its own stream.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
} // namespace detail

/// Derive substream `index` from a master seed.  The rule is fixed by the
/// file formats: state = mix64(master) ^ mix64(golden * (index + 1)).
/// Streams are independent of thread scheduling, so any worker count
/// reproduces the same numbers per logical object.
inline SplitMix64 derive_stream(std::uint64_t master, std::uint64_t index) {
    const std::uint64_t golden = 0x9E3779B97F4A7C15ull;
    return SplitMix64(detail::mix64(master) ^ detail::mix64(golden * (index + 1)));
}

/// One standard-normal pair via Box-Muller.
struct NormalPair {
    double a;
    double b;
};

inline NormalPair normal_pair(SplitMix64& rng) {
    const double u1 = rng.uniform_pos();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    return {r * std::cos(t), r * std::sin(t)};
}

} // namespace qlb
