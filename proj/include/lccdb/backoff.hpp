#pragma once

#include <cstdint>
#include <vector>

#include "lccdb/policy.hpp"
#include "lccdb/rational.hpp"

namespace lccdb {

// Maps a prior-abort count onto the table buckets 0, 1, 2+.
inline uint32_t backoff_bucket(uint64_t prior_aborts) {
    return prior_aborts >= 2 ? 2 : uint32_t(prior_aborts);
}

// Per-worker, per-type multiplicative backoff state. Durations are exact
// rational microseconds, clamped to [floor, ceiling].
class BackoffState {
  public:
    static Rational default_floor_us() { return Rational(10, 1); }       // 10 us
    static Rational default_ceiling_us() { return Rational(100000, 1); } // 100 ms

    explicit BackoffState(uint32_t type_count, Rational floor_us = default_floor_us(),
                          Rational ceiling_us = default_ceiling_us());

    // Applies the table's learned factor for (type, bucket, outcome):
    // aborted  -> backoff * (1 + alpha)
    // committed-> backoff / (1 + alpha)
    // Returns the new clamped duration in microseconds.
    Rational on_outcome(TypeIndex type, uint32_t prior_abort_bucket, TxnOutcome outcome,
                        const BackoffPolicyTable& table);

    const Rational& current(TypeIndex type) const { return current_[type]; }
    void set_current(TypeIndex type, Rational v);
    const Rational& floor_us() const { return floor_; }
    const Rational& ceiling_us() const { return ceiling_; }

    // Forget adaptation, e.g. after a policy swap.
    void reset();

  private:
    Rational clamp(Rational v) const;

    Rational floor_;
    Rational ceiling_;
    std::vector<Rational> current_;
};

// Sleeps approximately `us` microseconds: busy-waits below one millisecond
// (timer precision matters at that scale), yielding sleep above.
void backoff_sleep(const Rational& us);

}  // namespace lccdb
