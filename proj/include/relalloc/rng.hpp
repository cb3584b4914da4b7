#pragma once

// Deterministic splittable random streams.  Every work item (replication,
// prior draw) owns a stream derived from (master_seed, item index), so the
// simulation output is a pure function of the seed regardless of how work is
// scheduled across threads.
//
// Generator: SplitMix64 (Steele, Lea & Flood).  Gamma variates via
// Marsaglia-Tsang squeeze, normals via Box-Muller.  These choices are pinned:
// changing any of them changes every CSV byte downstream.

#include <cmath>
#include <cstdint>

#include "relalloc/core_model.hpp"

namespace relalloc {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    // Uniform on the open interval (0,1); never returns an endpoint.
    double next_double() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

// Streams for distinct (item, salt) pairs are computationally independent.
inline SplitMix64 stream_for(std::uint64_t master_seed, std::uint64_t item,
                             std::uint64_t salt = 0) {
    std::uint64_t s = mix64(master_seed + 0x9E3779B97F4A7C15ULL);
    s = mix64(s ^ (item + 0xD1B54A32D192ED03ULL));
    s = mix64(s ^ (salt + 0x8CB92BA72F3D8DD7ULL));
    return SplitMix64(s);
}

inline double rand_normal(SplitMix64& rng) {
    const double u1 = rng.next_double();
    const double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Marsaglia-Tsang for shape >= 1; shapes below 1 use the boost
// G(a) = G(a+1) * U^(1/a).
inline double rand_gamma(SplitMix64& rng, double shape) {
    if (shape < 1.0) {
        const double u = rng.next_double();
        return rand_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rand_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline double rand_beta(SplitMix64& rng, const BetaParams& params) {
    const double x = rand_gamma(rng, params.alpha);
    const double y = rand_gamma(rng, params.beta);
    return x / (x + y);
}

inline bool rand_bernoulli(SplitMix64& rng, double p) {
    return rng.next_double() < p;
}

inline std::int64_t rand_binomial(SplitMix64& rng, std::int64_t trials, double p) {
    std::int64_t successes = 0;
    for (std::int64_t k = 0; k < trials; ++k)
        successes += rand_bernoulli(rng, p) ? 1 : 0;
    return successes;
}

// Neumaier-compensated accumulator; summation order still matters, so callers
// must feed it in a fixed order.
class CompensatedSum {
  public:
    void add(double value) {
        const double t = sum_ + value;
        if (std::abs(sum_) >= std::abs(value))
            comp_ += (sum_ - t) + value;
        else
            comp_ += (value - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace relalloc
