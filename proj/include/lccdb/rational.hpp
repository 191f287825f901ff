#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lccdb {

// Exact non-negative rational. Backoff durations and alpha factors are kept
// rational so the multiplicative update and its inverse compose without
// rounding; denominators stay tiny in practice (products of 2/3/5 between
// clamps). If a long unclamped product ever overflows the reduced form, the
// value is snapped to a 2^-20 grid.
class Rational {
  public:
    constexpr Rational() : num_(0), den_(1) {}
    Rational(int64_t num, int64_t den) : num_(num), den_(den) {
        if (den_ <= 0 || num_ < 0) throw std::invalid_argument("rational out of domain");
        reduce();
    }
    static Rational from_int(int64_t v) { return Rational(v, 1); }

    // Exact conversion from a double such as 0.25; rejects values that are
    // not representable as n / 2^k with small k (policy files carry alphas
    // as plain JSON numbers).
    static bool try_from_double(double v, Rational& out);

    int64_t num() const { return num_; }
    int64_t den() const { return den_; }
    double to_double() const { return double(num_) / double(den_); }
    bool is_zero() const { return num_ == 0; }

    Rational operator*(const Rational& o) const { return combined(num_, den_, o.num_, o.den_); }
    Rational operator/(const Rational& o) const {
        if (o.num_ == 0) throw std::domain_error("divide by zero");
        return combined(num_, den_, o.den_, o.num_);
    }
    Rational operator+(const Rational& o) const {
        __int128 n = (__int128)num_ * o.den_ + (__int128)o.num_ * den_;
        __int128 d = (__int128)den_ * o.den_;
        return from_wide(n, d);
    }

    bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const {
        return (__int128)num_ * o.den_ < (__int128)o.num_ * den_;
    }
    bool operator<=(const Rational& o) const { return !(o < *this); }
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator>=(const Rational& o) const { return !(*this < o); }

    std::string str() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

  private:
    static Rational combined(int64_t n1, int64_t d1, int64_t n2, int64_t d2) {
        return from_wide((__int128)n1 * n2, (__int128)d1 * d2);
    }
    static Rational from_wide(__int128 n, __int128 d);
    void reduce() {
        int64_t g = std::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
    }

    int64_t num_;
    int64_t den_;
};

}  // namespace lccdb
