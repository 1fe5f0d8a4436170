#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace deskrl {

// Seeded generator with hand-rolled draw functions. The standard library's
// distribution objects are implementation-defined, so every draw here is
// spelled out to keep per-seed streams identical across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

    // Independent sub-stream derived from this stream's seed and a salt.
    Rng stream(std::uint64_t salt) const { return Rng(mix(seed_ + mix(salt))); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, bias-free.
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<int>(x % un);
    }

    // Standard normal via Box-Muller (cosine branch only).
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Index drawn from an unnormalized-tolerant probability row of length n.
    int categorical(const double* p, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += p[i];
        double u = uniform() * total;
        for (int i = 0; i < n; ++i) {
            u -= p[i];
            if (u < 0.0) return i;
        }
        return n - 1;
    }

    int categorical(const std::vector<double>& p) { return categorical(p.data(), static_cast<int>(p.size())); }

  private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
};

} // namespace deskrl
