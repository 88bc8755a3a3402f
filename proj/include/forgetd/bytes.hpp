#pragma once

#include "forgetd/common.hpp"

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace forgetd {

// Little-endian byte building/parsing shared by the checkpoint and ledger
// formats. The reader throws IntegrityError on any out-of-bounds access so a
// truncated or corrupted file can never be silently misread.

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
  public:
    ByteReader(const std::vector<std::uint8_t>& buf, std::string what)
        : buf_(buf), what_(std::move(what)) {}

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
    }

    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    const std::uint8_t* take(std::size_t n) {
        if (n > buf_.size() - pos_ || pos_ > buf_.size())
            throw IntegrityError("truncated " + what_ + " at byte " + std::to_string(pos_));
        const std::uint8_t* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

    bool exhausted() const { return pos_ == buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }
    std::size_t pos() const { return pos_; }
    const std::string& what() const { return what_; }

  private:
    const std::vector<std::uint8_t>& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

}  // namespace forgetd
