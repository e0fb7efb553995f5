#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "wela/tensor.hpp"

namespace wela {

/// Mixes a 64-bit value; used to derive independent sub-streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ stream);
}

/// Deterministic random stream. mt19937_64 is fully specified by the
/// standard and the float conversions below avoid distribution objects,
/// so sequences are bit-identical across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); rejection sampling keeps it unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller, pair-cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void fill_normal(Tensor& t) {
        for (float& v : t.data) v = static_cast<float>(normal());
    }

    template <class I>
    void shuffle(std::vector<I>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace wela
