#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lidarsim::nn {

/// Deterministic random source. Gaussian and uniform draws are implemented
/// explicitly (Box-Muller / 53-bit ldexp) instead of std::*_distribution so a
/// seed produces identical streams on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 42) : engine_(seed) {}

    double uniform() {  // [0, 1)
        return std::ldexp(static_cast<double>(engine_() >> 11), -53);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lidarsim::nn
