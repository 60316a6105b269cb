// Small byte-buffer helpers shared across the library.
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace mixagg {

using Bytes = std::vector<uint8_t>;

inline void put_u16(Bytes& b, uint16_t v) {
    b.push_back(uint8_t(v >> 8));
    b.push_back(uint8_t(v));
}

inline void put_u32(Bytes& b, uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(uint8_t(v >> s));
}

inline void put_u64(Bytes& b, uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) b.push_back(uint8_t(v >> s));
}

// Cursor-style reader; all read_* return false on underrun so decoders
// stay total.
struct ByteReader {
    const uint8_t* p = nullptr;
    size_t len = 0;
    size_t off = 0;

    explicit ByteReader(const Bytes& b) : p(b.data()), len(b.size()) {}
    ByteReader(const uint8_t* d, size_t n) : p(d), len(n) {}

    size_t remaining() const { return len - off; }

    bool read_u8(uint8_t& v) {
        if (remaining() < 1) return false;
        v = p[off++];
        return true;
    }
    bool read_u16(uint16_t& v) {
        if (remaining() < 2) return false;
        v = uint16_t(p[off]) << 8 | p[off + 1];
        off += 2;
        return true;
    }
    bool read_u32(uint32_t& v) {
        if (remaining() < 4) return false;
        v = 0;
        for (int i = 0; i < 4; i++) v = v << 8 | p[off + i];
        off += 4;
        return true;
    }
    bool read_u64(uint64_t& v) {
        if (remaining() < 8) return false;
        v = 0;
        for (int i = 0; i < 8; i++) v = v << 8 | p[off + i];
        off += 8;
        return true;
    }
    bool read_bytes(Bytes& out, size_t n) {
        if (remaining() < n) return false;
        out.assign(p + off, p + off + n);
        off += n;
        return true;
    }
    bool skip(size_t n) {
        if (remaining() < n) return false;
        off += n;
        return true;
    }
};

inline Bytes cat(const Bytes& a, const Bytes& b) {
    Bytes r = a;
    r.insert(r.end(), b.begin(), b.end());
    return r;
}

inline void append(Bytes& a, const Bytes& b) { a.insert(a.end(), b.begin(), b.end()); }

inline std::string to_hex(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (uint8_t c : b) {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 15]);
    }
    return s;
}

inline Bytes from_hex(const std::string& s) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes b;
    b.reserve(s.size() / 2);
    for (size_t i = 0; i + 1 < s.size(); i += 2) {
        int hi = nib(s[i]), lo = nib(s[i + 1]);
        if (hi < 0 || lo < 0) break;
        b.push_back(uint8_t(hi << 4 | lo));
    }
    return b;
}

}  // namespace mixagg
