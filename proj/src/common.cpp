#include "lccdb/common.hpp"

namespace lccdb {

static const char* kHexDigits = "0123456789abcdef";

std::string hex_encode(const uint8_t* p, size_t n) {
    std::string s;
    s.reserve(n * 2);
    for (size_t i = 0; i < n; i++) {
        s.push_back(kHexDigits[p[i] >> 4]);
        s.push_back(kHexDigits[p[i] & 0xf]);
    }
    return s;
}

std::string key_to_hex(const Key& k) { return hex_encode(k.bytes.data(), k.len); }

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Key key_from_hex(const std::string& s) {
    if (s.size() % 2 != 0 || s.size() / 2 > 23) throw std::invalid_argument("bad key hex");
    Key k;
    k.len = uint8_t(s.size() / 2);
    for (size_t i = 0; i < s.size(); i += 2) {
        int hi = hex_nibble(s[i]), lo = hex_nibble(s[i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("bad key hex");
        k.bytes[i / 2] = uint8_t(hi << 4 | lo);
    }
    return k;
}

}  // namespace lccdb
