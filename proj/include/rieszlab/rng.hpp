#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rieszlab/markov.hpp"

namespace rieszlab {

/// Seeded generator with fixed-algorithm distributions, so identical seeds
/// reproduce identical streams across platforms and library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double uniform() {  // [0,1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

    double gaussian() {  // Box-Muller
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double rademacher() { return (eng_() & 1) ? 1.0 : -1.0; }

    Vector gaussian_vector(int n) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = gaussian();
        return v;
    }

    Vector rademacher_vector(int n) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = rademacher();
        return v;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace rieszlab
