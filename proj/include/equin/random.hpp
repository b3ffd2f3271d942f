#pragma once

#include <cstdint>
#include <random>

namespace equin {

/// Seeded pseudo-random stream. Single owner: never share one stream
/// between threads; derive independent children with `fork` instead.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(make_engine(seed)) {}

    /// Independent child stream; depends only on (seed, stream_id), not on
    /// how much of this stream has been consumed.
    RandomStream fork(std::uint64_t stream_id) const {
        return RandomStream(splitmix64(seed_ ^ splitmix64(stream_id + 0x9e3779b97f4a7c15ull)));
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }
    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }
    static std::mt19937_64 make_engine(std::uint64_t seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        return std::mt19937_64(seq);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace equin
