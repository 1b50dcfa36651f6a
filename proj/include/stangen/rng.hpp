#pragma once

#include <cstdint>
#include <random>

namespace stangen {

// Seedable generator with named derived streams: `split(k)` yields an
// independent stream for worker k, reproducible from the root seed alone.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : seed_(seed), stream_(stream), eng_(mix(seed, stream)) {}

    Rng split(uint64_t k) const { return Rng(seed_, mix(stream_ + 1, k)); }

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    double uniform01() {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        return d(eng_);
    }

    double gauss() {
        std::normal_distribution<double> d(0.0, 1.0);
        return d(eng_);
    }

    double gamma(double shape) {
        std::gamma_distribution<double> d(shape, 1.0);
        return d(eng_);
    }

    long long binomial(long long n, double p) {
        std::binomial_distribution<long long> d(n, p);
        return d(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    uint64_t seed_;
    uint64_t stream_;
    std::mt19937_64 eng_;

    static uint64_t mix(uint64_t a, uint64_t b) {
        // splitmix64 over the pair
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

}  // namespace stangen
