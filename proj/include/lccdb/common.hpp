#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>

namespace lccdb {

using TableId = uint16_t;
using TypeIndex = uint32_t;
using AccessId = uint32_t;  // 1-based within a transaction type

// Fixed-capacity binary key. Components are encoded big-endian so that
// lexicographic byte order equals numeric order for range scans.
struct Key {
    uint8_t len = 0;
    std::array<uint8_t, 23> bytes{};

    bool operator==(const Key& o) const {
        return len == o.len && std::memcmp(bytes.data(), o.bytes.data(), len) == 0;
    }
    bool operator<(const Key& o) const {
        int c = std::memcmp(bytes.data(), o.bytes.data(), std::min(len, o.len));
        if (c != 0) return c < 0;
        return len < o.len;
    }
};

// Fixed-capacity value payload. 47 bytes is enough for every record type in
// the bundled workloads; the bound keeps records inline and torn-read-safe.
struct Value {
    uint8_t len = 0;
    std::array<uint8_t, 47> bytes{};

    bool operator==(const Value& o) const {
        return len == o.len && std::memcmp(bytes.data(), o.bytes.data(), len) == 0;
    }
};

class KeyBuilder {
  public:
    KeyBuilder& u8(uint8_t v) { return put(&v, 1); }
    KeyBuilder& u16(uint16_t v) {
        uint8_t b[2] = {uint8_t(v >> 8), uint8_t(v)};
        return put(b, 2);
    }
    KeyBuilder& u32(uint32_t v) {
        uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
        return put(b, 4);
    }
    KeyBuilder& u64(uint64_t v) {
        uint8_t b[8];
        for (int i = 0; i < 8; i++) b[i] = uint8_t(v >> (56 - 8 * i));
        return put(b, 8);
    }
    Key build() const { return k_; }

  private:
    KeyBuilder& put(const uint8_t* p, size_t n) {
        if (k_.len + n > k_.bytes.size()) throw std::length_error("key too long");
        std::memcpy(k_.bytes.data() + k_.len, p, n);
        k_.len = uint8_t(k_.len + n);
        return *this;
    }
    Key k_;
};

inline Key make_key_u64(uint64_t v) { return KeyBuilder().u64(v).build(); }

// Little struct-packing helpers for workload payloads.
class ValueWriter {
  public:
    ValueWriter& u32(uint32_t v) { return put(&v, 4); }
    ValueWriter& u64(uint64_t v) { return put(&v, 8); }
    ValueWriter& i64(int64_t v) { return put(&v, 8); }
    Value build() const { return v_; }

  private:
    ValueWriter& put(const void* p, size_t n) {
        if (v_.len + n > v_.bytes.size()) throw std::length_error("value too long");
        std::memcpy(v_.bytes.data() + v_.len, p, n);
        v_.len = uint8_t(v_.len + n);
        return *this;
    }
    Value v_;
};

class ValueReader {
  public:
    explicit ValueReader(const Value& v) : v_(v) {}
    uint32_t u32() { return get<uint32_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    int64_t i64() { return get<int64_t>(); }

  private:
    template <class T>
    T get() {
        if (off_ + sizeof(T) > v_.len) throw std::out_of_range("value underrun");
        T t;
        std::memcpy(&t, v_.bytes.data() + off_, sizeof(T));
        off_ += sizeof(T);
        return t;
    }
    const Value& v_;
    size_t off_ = 0;
};

struct KeyHash {
    size_t operator()(const Key& k) const {
        // FNV-1a
        uint64_t h = 1469598103934665603ull;
        for (uint8_t i = 0; i < k.len; i++) {
            h ^= k.bytes[i];
            h *= 1099511628211ull;
        }
        return size_t(h);
    }
};

inline uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 1469598103934665603ull) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex_encode(const uint8_t* p, size_t n);
std::string key_to_hex(const Key& k);
Key key_from_hex(const std::string& s);

}  // namespace lccdb
