#include "lccdb/backoff.hpp"

#include <chrono>
#include <thread>

namespace lccdb {

BackoffState::BackoffState(uint32_t type_count, Rational floor_us, Rational ceiling_us)
    : floor_(floor_us), ceiling_(ceiling_us), current_(type_count, floor_us) {}

Rational BackoffState::clamp(Rational v) const {
    if (v < floor_) return floor_;
    if (v > ceiling_) return ceiling_;
    return v;
}

void BackoffState::set_current(TypeIndex type, Rational v) { current_[type] = clamp(v); }

void BackoffState::reset() {
    for (auto& c : current_) c = floor_;
}

Rational BackoffState::on_outcome(TypeIndex type, uint32_t prior_abort_bucket, TxnOutcome outcome,
                                  const BackoffPolicyTable& table) {
    const Rational& alpha = table.alpha(type, prior_abort_bucket, outcome);
    Rational factor = Rational(1, 1) + alpha;
    Rational next = outcome == TxnOutcome::Aborted ? current_[type] * factor
                                                   : current_[type] / factor;
    current_[type] = clamp(next);
    return current_[type];
}

void backoff_sleep(const Rational& us) {
    using clock = std::chrono::steady_clock;
    int64_t ns = int64_t(us.to_double() * 1000.0);
    if (ns <= 0) return;
    if (ns < 1'000'000) {
        auto until = clock::now() + std::chrono::nanoseconds(ns);
        while (clock::now() < until) {
#if defined(__x86_64__)
            __builtin_ia32_pause();
#endif
        }
    } else {
        std::this_thread::sleep_for(std::chrono::nanoseconds(ns));
    }
}

}  // namespace lccdb
