// Deterministic seeded randomness for the whole library.
//
// A single 64-bit master seed identifies a run. Independent sub-streams are
// derived by hashing (seed, purpose-tag, index); every consumer owns its own
// engine, so batch items can be generated in any order (or in parallel)
// without changing results. Reproducibility is guaranteed within one binary;
// cross-toolchain bit-exactness is out of scope.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace subgram {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

// Stream id for a (seed, tag, index) triple.
inline uint64_t substream_seed(uint64_t seed, std::string_view tag, uint64_t index) {
    uint64_t h = detail::splitmix64(seed ^ detail::fnv1a64(tag));
    return detail::splitmix64(h ^ index);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static Rng substream(uint64_t seed, std::string_view tag, uint64_t index) {
        return Rng(substream_seed(seed, tag, index));
    }

    std::mt19937_64& engine() { return engine_; }

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double gaussian(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    // Integer in [0, n).
    uint64_t below(uint64_t n) {
        return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_);
    }

    // One draw from Dirichlet(alpha * 1_k), as normalized Gamma variates.
    std::vector<double> dirichlet(std::size_t k, double alpha) {
        std::gamma_distribution<double> gamma(alpha, 1.0);
        std::vector<double> x(k);
        double sum = 0.0;
        for (auto& xi : x) {
            xi = gamma(engine_);
            sum += xi;
        }
        // Gamma draws can underflow to 0 for small alpha; renormalize against
        // an all-zero row by falling back to a uniform row.
        if (sum <= 0.0) {
            for (auto& xi : x) xi = 1.0 / static_cast<double>(k);
            return x;
        }
        for (auto& xi : x) xi /= sum;
        return x;
    }

    // Sample an index from an (unnormalized is fine) nonnegative weight vector.
    std::size_t categorical(const std::vector<double>& w) {
        double total = 0.0;
        for (double v : w) total += v;
        double r = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            acc += w[i];
            if (r < acc) return i;
        }
        return w.empty() ? 0 : w.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace subgram
