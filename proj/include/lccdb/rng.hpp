#pragma once

#include <cstdint>
#include <vector>

namespace lccdb {

// Deterministic 64-bit generator (splitmix64 core). std::mt19937_64 would do,
// but the distribution adapters in libstdc++ are not pinned across releases
// and we freeze generated streams in tests.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, bound) via rejection.
    uint64_t next_below(uint64_t bound) {
        if (bound == 0) return 0;
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Inclusive range, may be negative.
    int64_t next_range(int64_t lo, int64_t hi) {
        return lo + int64_t(next_below(uint64_t(hi - lo + 1)));
    }

    // Uniform in [0, 1).
    double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

    bool next_bool() { return next_u64() & 1; }

    // Independent child stream (for per-worker generators).
    Rng split(uint64_t salt) {
        Rng r(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull));
        return r;
    }

  private:
    uint64_t state_;
};

// Zipfian sampler over ranks 1..n with parameter theta (theta = 0 is uniform).
// CDF table + binary search.
class ZipfGen {
  public:
    ZipfGen(uint64_t n, double theta);
    // Returns a rank in [1, n]; rank 1 is the most popular.
    uint64_t sample(Rng& rng) const;
    uint64_t n() const { return n_; }

  private:
    uint64_t n_;
    double theta_;
    std::vector<double> cdf_;  // empty when theta_ == 0
};

}  // namespace lccdb
