#pragma once

#include <cmath>
#include <cstdint>

namespace snasnet {

// Counter-friendly splitmix64 generator. Hand-rolled Box-Muller keeps the
// Gaussian stream identical across standard-library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    uint32_t below(uint32_t n) {
        return static_cast<uint32_t>(next() % n);
    }

    bool coin(double p) { return uniform() < p; }

    float gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = static_cast<float>(mag * std::sin(2.0 * M_PI * u2));
        have_spare_ = true;
        return static_cast<float>(mag * std::cos(2.0 * M_PI * u2));
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    float spare_ = 0.0f;
};

// Order-independent seed derivation for parallel candidate evaluation.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    uint64_t z = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace snasnet
