#ifndef PANELKIT_RNG_HPP
#define PANELKIT_RNG_HPP

#include <cmath>
#include <cstdint>

namespace panelkit {

/// Seeded splitmix64 generator with cheap substream derivation.
///
/// All randomness in the toolkit flows through this type so that results are
/// reproducible bit-for-bit across platforms and thread schedules. The
/// standard <random> distributions are implementation-defined, so uniform and
/// normal draws are generated explicitly here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed + 0x9e3779b97f4a7c15ULL)) {}

    /// Independent stream derived from (seed, index). Used to give each
    /// bootstrap replicate or simulation its own generator, which keeps
    /// results identical whether replicates run serially or in parallel.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = mix(seed ^ 0x6a09e667f3bcc909ULL);
        s = mix(s + (index + 1) * 0x9e3779b97f4a7c15ULL);
        return Rng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Standard normal via Box-Muller. Two uniforms per draw; no cached
    /// spare, so the draw count per call is fixed.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// +1 or -1 with equal probability.
    double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

    /// Mammen's two-point law: mean 0, variance 1, E[w^3] = 1.
    double mammen() {
        static const double sqrt5 = 2.2360679774997896964091736687747;
        static const double lo = -(sqrt5 - 1.0) / 2.0;
        static const double hi = (sqrt5 + 1.0) / 2.0;
        static const double p_lo = (sqrt5 + 1.0) / (2.0 * sqrt5);
        return uniform01() < p_lo ? lo : hi;
    }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Modulo bias is irrelevant at the scales used here (n << 2^64).
        return next_u64() % n;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace panelkit

#endif
