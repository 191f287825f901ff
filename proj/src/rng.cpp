#include "lccdb/rng.hpp"

#include <cmath>

namespace lccdb {

ZipfGen::ZipfGen(uint64_t n, double theta) : n_(n), theta_(theta) {
    if (theta_ <= 0.0) return;
    cdf_.resize(n_);
    double sum = 0;
    for (uint64_t i = 1; i <= n_; i++) sum += 1.0 / std::pow(double(i), theta_);
    double acc = 0;
    for (uint64_t i = 1; i <= n_; i++) {
        acc += 1.0 / std::pow(double(i), theta_) / sum;
        cdf_[i - 1] = acc;
    }
    cdf_[n_ - 1] = 1.0;
}

uint64_t ZipfGen::sample(Rng& rng) const {
    if (cdf_.empty()) return 1 + rng.next_below(n_);
    double z = rng.next_unit();
    // first index with cdf >= z
    uint64_t lo = 0, hi = n_ - 1;
    while (lo < hi) {
        uint64_t mid = (lo + hi) / 2;
        if (cdf_[mid] >= z)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo + 1;
}

}  // namespace lccdb
