#include "lccdb/rational.hpp"

#include <cmath>

namespace lccdb {

bool Rational::try_from_double(double v, Rational& out) {
    if (!(v >= 0) || !std::isfinite(v)) return false;
    // Scale by successive powers of two; JSON alphas like 0.25 terminate fast.
    int64_t den = 1;
    double scaled = v;
    for (int i = 0; i < 32; i++) {
        double r = std::round(scaled);
        if (r == scaled && r <= 9.2e18) {
            out = Rational(int64_t(r), den);
            return true;
        }
        scaled *= 2;
        den *= 2;
    }
    return false;
}

Rational Rational::from_wide(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("zero denominator");
    // gcd on wide values
    __int128 a = n, b = d;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        n /= a;
        d /= a;
    }
    constexpr __int128 kMax = (__int128)INT64_MAX;
    if (n > kMax || d > kMax) {
        // Pathological unclamped product; snap to a 2^-20 grid.
        double approx = double(n) / double(d);
        __int128 num = (__int128)std::llround(approx * double(1 << 20));
        if (num > kMax) num = kMax;
        Rational r;
        r.num_ = int64_t(num);
        r.den_ = 1 << 20;
        r.reduce();
        return r;
    }
    Rational r;
    r.num_ = int64_t(n);
    r.den_ = int64_t(d);
    return r;
}

}  // namespace lccdb
