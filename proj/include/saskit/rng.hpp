#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "saskit/matrix.hpp"

namespace saskit {

using Vec3 = std::array<double, 3>;

// Deterministic RNG. mt19937_64 has a standardized sequence, and all
// distribution transforms are hand-rolled here so that results are
// reproducible across standard libraries, not just across runs.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) {
        return static_cast<int>(engine_() % static_cast<uint64_t>(n));
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Vec3 unit_vector() {
        while (true) {
            Vec3 v{normal(), normal(), normal()};
            const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            if (n > 1e-12) return {v[0] / n, v[1] / n, v[2] / n};
        }
    }

    // Fisher-Yates; deterministic for a given seed.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            const int j = uniform_int(i + 1);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Uniform random rotation via Shoemake's quaternion method.
inline Matrix random_rotation(Rng& rng) {
    const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double w = a * std::sin(2.0 * M_PI * u2);
    const double x = a * std::cos(2.0 * M_PI * u2);
    const double y = b * std::sin(2.0 * M_PI * u3);
    const double z = b * std::cos(2.0 * M_PI * u3);
    Matrix r(3, 3);
    r(0, 0) = 1 - 2 * (y * y + z * z);
    r(0, 1) = 2 * (x * y - w * z);
    r(0, 2) = 2 * (x * z + w * y);
    r(1, 0) = 2 * (x * y + w * z);
    r(1, 1) = 1 - 2 * (x * x + z * z);
    r(1, 2) = 2 * (y * z - w * x);
    r(2, 0) = 2 * (x * z - w * y);
    r(2, 1) = 2 * (y * z + w * x);
    r(2, 2) = 1 - 2 * (x * x + y * y);
    return r;
}

inline Matrix axis_angle_rotation(const Vec3& axis, double angle) {
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n < 1e-15) throw std::invalid_argument("axis_angle_rotation: zero axis");
    const double ux = axis[0] / n, uy = axis[1] / n, uz = axis[2] / n;
    const double c = std::cos(angle), s = std::sin(angle), oc = 1.0 - c;
    Matrix r(3, 3);
    r(0, 0) = c + ux * ux * oc;
    r(0, 1) = ux * uy * oc - uz * s;
    r(0, 2) = ux * uz * oc + uy * s;
    r(1, 0) = uy * ux * oc + uz * s;
    r(1, 1) = c + uy * uy * oc;
    r(1, 2) = uy * uz * oc - ux * s;
    r(2, 0) = uz * ux * oc - uy * s;
    r(2, 1) = uz * uy * oc + ux * s;
    r(2, 2) = c + uz * uz * oc;
    return r;
}

// splitmix64 step, used to derive per-cell seeds from a base seed.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = mix_seed(base ^ 0xa076bc9554fca3d7ULL);
    s = mix_seed(s ^ a);
    s = mix_seed(s ^ b);
    s = mix_seed(s ^ c);
    return s;
}

}  // namespace saskit
