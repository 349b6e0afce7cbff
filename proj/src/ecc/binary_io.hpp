#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "ecc/errors.hpp"

namespace ecc::binary {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xffu);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_f64(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xffu);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("unexpected end of binary stream");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
}

inline double read_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("unexpected end of binary stream");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

}  // namespace ecc::binary
