#pragma once

#include <cmath>
#include <cstdint>

// Counter-seeded, stream-splittable RNG for reproducible Monte Carlo.
// Every path gets its own xoshiro256++ stream derived from (seed, path index),
// so results are bit-identical regardless of how paths are scheduled across
// threads.  Normal variates use Box-Muller on explicit 53-bit uniforms; no
// implementation-defined std distributions are involved.

namespace carbon {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Xoshiro256pp {
  public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t st = seed;
        for (auto& w : s_) w = splitmix64(st);
    }

    // Independent stream for one simulation path.
    static Xoshiro256pp path_stream(std::uint64_t seed, std::uint64_t path) {
        Xoshiro256pp g(seed ^ (0x9E3779B97F4A7C15ULL * (path + 1)));
        return g;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53 mantissa bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// Standard normal draws, Box-Muller with the sine partner cached.
class GaussianStream {
  public:
    explicit GaussianStream(Xoshiro256pp rng) : rng_(rng) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - rng_.uniform01();  // (0, 1]
        const double u2 = rng_.uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    Xoshiro256pp rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace carbon
