#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

// Deterministic, splittable random streams. Every consumer derives its own
// stream from (seed, purpose, id), so teachers, designs, noise and MC shards
// are independently reproducible regardless of evaluation order.

namespace ptft::rng {

enum class Purpose : std::uint64_t {
    teacher_mask = 1,
    teacher_sign = 2,
    teacher_slab = 3,
    design = 4,
    label_noise = 5,
    mc_beta = 6,
    mc_eta = 7,
    mc_pair = 8,
    generic = 9,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t purpose, std::uint64_t id) {
    std::uint64_t s = seed;
    std::uint64_t k = splitmix64(s);
    s ^= purpose * 0xd1342543de82ef95ULL;
    k ^= splitmix64(s);
    s ^= id * 0xaf251af3b0f025b5ULL;
    k ^= splitmix64(s);
    return k;
}

/// Inverse standard-normal CDF. Acklam's rational approximation polished with
/// one Halley step of Phi(x)-u, accurate to ~1 ulp over (0,1).
inline double norm_inv_cdf(double u) {
    constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
    constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
    constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
    constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;

    double x;
    if (u < plow) {
        double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        double q = u - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement: e = Phi(x) - u, phi = pdf(x).
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double sqrt_2pi = 2.5066282746310005024;
    double e = 0.5 * std::erfc(-x * inv_sqrt2) - u;
    double pdf = std::exp(-0.5 * x * x) / sqrt_2pi;
    if (pdf > 0.0) {
        double w = e / pdf;
        x -= w / (1.0 + 0.5 * x * w);
    }
    return x;
}

/// xoshiro256++ stream keyed by (seed, purpose, id).
class Stream {
  public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t id = 0) {
        std::uint64_t k = mix_key(seed, static_cast<std::uint64_t>(purpose), id);
        for (auto& si : s_) si = splitmix64(k);
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in the open interval (0,1).
    double u01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() { return norm_inv_cdf(u01()); }

    /// Uniform integer in [0, n). Unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

  private:
    std::uint64_t s_[4];
};

}  // namespace ptft::rng
