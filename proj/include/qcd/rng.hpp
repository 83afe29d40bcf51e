#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qcd {

// splitmix64 finalizer; decorrelates nearby seeds before they reach the engine.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream seed for trial i: base_seed XOR trial index. The Rng constructor
// scrambles the raw seed, so adjacent trial indices give independent streams.
inline std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial_index) {
    return base_seed ^ trial_index;
}

// Tag mixed into the seed of the fractional-sampling coin stream so coin
// tosses never share a generator with the observation stream.
inline constexpr std::uint64_t kCoinStreamTag = 0xc01f'11f5'0b5e'713eULL;

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Marsaglia polar method. The cached spare is a standard normal, so it is
    // valid even if the caller's (mean, sd) changes between draws.
    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    // Geometric on {1, 2, ...} with P(G = n) = (1-rho)^(n-1) rho, by inverse CDF:
    // G = 1 + floor(log u / log(1-rho)), u uniform on (0, 1].
    std::uint64_t geometric(double rho) {
        const double u = uniform_pos();
        const double x = std::log(u) / std::log(1.0 - rho);
        return 1 + static_cast<std::uint64_t>(x);
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace qcd
