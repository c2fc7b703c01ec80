#ifndef SYSTRAJ_RNG_HPP
#define SYSTRAJ_RNG_HPP

#include <cmath>
#include <cstdint>

namespace systraj {

// splitmix64; fully specified so streams are reproducible across platforms
// and standard-library versions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and stream labels.
/// Changing one label never perturbs streams with other labels.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s ^= a * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL;
    h ^= splitmix64(s);
    s ^= b * 0xDA942042E4DD58B5ULL + 0x9E6C63D0A0F3EABFULL;
    h ^= splitmix64(s);
    return h;
}

/// Counter-based Gaussian/uniform stream (splitmix64 + Box-Muller).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform on (0,1); never returns 0 so log() below is safe.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace systraj

#endif
