#ifndef QBROAD_RNG_HPP
#define QBROAD_RNG_HPP

#include <cstdint>
#include <random>

namespace qbroad {

/// splitmix64 finalizer; used to derive independent stream keys from a
/// (master_seed, stream_index) pair so ensemble members are reproducible
/// regardless of scheduling order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(stream + 0x51ed2701ULL));
}

/// Deterministic random stream. mt19937_64 is fully specified by the
/// standard and the mappings below are explicit, so sequences are
/// bit-identical across platforms, not just per build.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() { return ((engine_() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal pair via the Box-Muller transform.
    void gaussian_pair(double& g0, double& g1) {
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double phi = 6.283185307179586476925286766559 * uniform();
        g0 = r * std::cos(phi);
        g1 = r * std::sin(phi);
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double g0, g1;
        gaussian_pair(g0, g1);
        spare_ = g1;
        have_spare_ = true;
        return g0;
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace qbroad

#endif
