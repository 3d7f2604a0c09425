#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace povsim {

// Bijective 64-bit mixer (splitmix64 finalizer).  Used to spread structured
// seed material (master seed, stream id, indices) into statistically
// independent engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derives a child seed from (master, stream, index).  The final mix is
// bijective in `index`, so distinct indices under the same stream can never
// collide.  Pack two small indices into one via pack_index when needed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
    std::uint64_t h = mix64(master + 0x9E3779B97F4A7C15ull);
    h = mix64(h ^ (stream + 0xD1B54A32D192ED03ull));
    return mix64(h ^ index);
}

constexpr std::uint64_t pack_index(std::uint64_t hi, std::uint64_t lo) {
    return (hi << 32) | (lo & 0xFFFFFFFFull);
}

// Deterministic random source: a fixed, standardized engine plus hand-rolled
// transforms so that every draw sequence is reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_bits() { return eng_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform on {0, ..., n-1}, rejection sampled to avoid modulo bias.
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit =
            (std::numeric_limits<std::uint64_t>::max() / un) * un;
        std::uint64_t r;
        do {
            r = eng_();
        } while (r >= limit);
        return static_cast<int>(r % un);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with a cached spare deviate.
    double normal(double mean, double sd) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        // u1 on (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + sd * r * std::cos(theta);
    }

    // Knuth's product method; fine for the moderate rates used here.
    int poisson(double rate) {
        if (rate < 0.0) throw std::invalid_argument("poisson: rate must be >= 0");
        const double limit = std::exp(-rate);
        int k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace povsim
