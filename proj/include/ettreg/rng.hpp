#ifndef ETTREG_RNG_HPP
#define ETTREG_RNG_HPP

#include <cmath>
#include <cstdint>

namespace ettreg {

/// splitmix64 finalizer; the sole mixing primitive of the generator.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random generator: word(seed, stream, counter) =
/// splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter).
///
/// Stateless in the usual sense; every draw is addressed by its counter, so
/// simulations are reproducible regardless of evaluation order. Streams keep
/// independent noise sources (per sensor, per vehicle) decoupled.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64(splitmix64(seed) ^ stream)) {}

    std::uint64_t word(std::uint64_t counter) const {
        return splitmix64(key_ ^ counter);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01(std::uint64_t counter) const {
        return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
    double normal(std::uint64_t counter) const {
        const double u1 =
            (static_cast<double>(word(2 * counter) >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform01(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Normal truncated to [-bound, bound] by clamping the tails.
    double bounded_normal(std::uint64_t counter, double sigma, double bound) const {
        const double v = sigma * normal(counter);
        if (v > bound) return bound;
        if (v < -bound) return -bound;
        return v;
    }

private:
    std::uint64_t key_;
};

} // namespace ettreg

#endif
