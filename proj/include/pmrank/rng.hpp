#pragma once

#include <cmath>
#include <cstdint>

#include "pmrank/common.hpp"

namespace pmrank {

// splitmix64, used both as a seed mixer and to derive independent streams
// from (seed, id...) tuples so parallel and serial runs draw identically.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256** with explicit, portable draw transforms. std facilities are
// avoided on purpose: distribution implementations differ across standard
// libraries and the simulator promises bit-identical output for a seed.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    static Rng stream(std::uint64_t seed, std::uint64_t id0, std::uint64_t id1 = 0) {
        std::uint64_t sm = seed;
        std::uint64_t mix = splitmix64(sm) ^ (0x9e3779b97f4a7c15ull * (id0 + 1));
        mix ^= 0xc2b2ae3d27d4eb4full * (id1 + 1);
        return Rng(mix);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on (0,1]; never returns 0 so log() is safe
    double uniform01() {
        const std::uint64_t bits = next_u64() >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; consumes two uniforms per draw, no cached second value so
    // the draw sequence is a pure function of the call count.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double gumbel(double location, double scale) {
        return location - scale * std::log(-std::log(uniform01()));
    }

    double logistic(double location, double scale) {
        const double u = uniform01();
        return location + scale * std::log(u / (1.0 - u + 1e-300));
    }

    // Fisher-Yates prefix: first k entries of a random permutation of 0..n-1
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < k && i < n - 1; ++i) {
            const int j = i + static_cast<int>(next_u64() % static_cast<std::uint64_t>(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

   private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

}  // namespace pmrank
