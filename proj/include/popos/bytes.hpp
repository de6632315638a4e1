#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace popos {

using Bytes = std::vector<uint8_t>;

inline void put_u8(Bytes& out, uint8_t v) { out.push_back(v); }

inline void put_u16be(Bytes& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void put_u32be(Bytes& out, uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

inline void put_u64be(Bytes& out, uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

inline void put_bytes(Bytes& out, const uint8_t* p, size_t n) {
    out.insert(out.end(), p, p + n);
}

inline void put_bytes(Bytes& out, const Bytes& b) { put_bytes(out, b.data(), b.size()); }

/// Bounds-checked sequential reader over a byte buffer.
class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const Bytes& b) : ByteReader(b.data(), b.size()) {}

    bool ok() const { return ok_; }
    size_t remaining() const { return ok_ ? size_ - pos_ : 0; }
    bool at_end() const { return ok_ && pos_ == size_; }

    uint8_t u8() { return take(1) ? data_[pos_ - 1] : 0; }

    uint16_t u16be() {
        if (!take(2)) return 0;
        return static_cast<uint16_t>(data_[pos_ - 2] << 8 | data_[pos_ - 1]);
    }

    uint32_t u32be() {
        if (!take(4)) return 0;
        uint32_t v = 0;
        for (size_t i = pos_ - 4; i < pos_; ++i) v = v << 8 | data_[i];
        return v;
    }

    uint64_t u64be() {
        if (!take(8)) return 0;
        uint64_t v = 0;
        for (size_t i = pos_ - 8; i < pos_; ++i) v = v << 8 | data_[i];
        return v;
    }

    bool read_into(uint8_t* dst, size_t n) {
        if (!take(n)) return false;
        std::memcpy(dst, data_ + pos_ - n, n);
        return true;
    }

    Bytes blob(size_t n) {
        Bytes b;
        if (!take(n)) return b;
        b.assign(data_ + pos_ - n, data_ + pos_);
        return b;
    }

private:
    bool take(size_t n) {
        if (!ok_ || size_ - pos_ < n) {
            ok_ = false;
            return false;
        }
        pos_ += n;
        return true;
    }

    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    bool ok_ = true;
};

inline std::string to_hex(const uint8_t* p, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(2 * n);
    for (size_t i = 0; i < n; ++i) {
        s.push_back(digits[p[i] >> 4]);
        s.push_back(digits[p[i] & 0xf]);
    }
    return s;
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

}  // namespace popos
