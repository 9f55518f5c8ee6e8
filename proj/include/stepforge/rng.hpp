#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace stepforge {

// Deterministic, platform-independent RNG. std::shuffle and the standard
// distributions are implementation-defined, so everything that must be
// reproducible across toolchains goes through this type instead.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // splitmix64
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1), safe for log()
    double uniform_open() {
        double u = uniform();
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // standard Gumbel(0, 1)
    double gumbel() { return -std::log(-std::log(uniform_open())); }

    // uniform integer in [0, n)
    std::uint64_t bounded(std::uint64_t n) {
        // Lemire's nearly-divisionless method
        std::uint64_t x = next();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                x = next();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Fisher-Yates over indices [0, n)
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

  private:
    std::uint64_t state_;
};

}  // namespace stepforge
