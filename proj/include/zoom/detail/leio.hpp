#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "zoom/common.hpp"

namespace zoom::detail {

// Little-endian binary stream helpers shared by the file formats.

inline void put_bytes(std::ostream& os, const void* p, std::size_t len) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
}

inline void put_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    put_bytes(os, b, 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 8);
}

inline void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

inline void put_f32_array(std::ostream& os, const float* p, std::size_t count) {
    // IEEE-754 little-endian on every supported target; bulk write.
    put_bytes(os, p, count * 4);
}

inline void put_varint(std::ostream& os, uint64_t v) {
    while (v >= 0x80) {
        unsigned char b = static_cast<unsigned char>(v) | 0x80;
        put_bytes(os, &b, 1);
        v >>= 7;
    }
    unsigned char b = static_cast<unsigned char>(v);
    put_bytes(os, &b, 1);
}

inline void get_bytes(std::istream& is, void* p, std::size_t len, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(is.gcount()) != len)
        throw FormatError(std::string("truncated input while reading ") + what);
}

inline uint16_t get_u16(std::istream& is, const char* what = "u16") {
    unsigned char b[2];
    get_bytes(is, b, 2, what);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline uint32_t get_u32(std::istream& is, const char* what = "u32") {
    unsigned char b[4];
    get_bytes(is, b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t get_u64(std::istream& is, const char* what = "u64") {
    uint64_t v = 0;
    unsigned char b[8];
    get_bytes(is, b, 8, what);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline float get_f32(std::istream& is, const char* what = "f32") {
    uint32_t bits = get_u32(is, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline void get_f32_array(std::istream& is, float* p, std::size_t count, const char* what) {
    get_bytes(is, p, count * 4, what);
}

inline uint64_t get_varint(std::istream& is, const char* what = "varint") {
    uint64_t v = 0;
    int shift = 0;
    for (;;) {
        unsigned char b;
        get_bytes(is, &b, 1, what);
        v |= static_cast<uint64_t>(b & 0x7f) << shift;
        if (!(b & 0x80)) return v;
        shift += 7;
        if (shift > 63) throw FormatError(std::string("overlong varint in ") + what);
    }
}

}  // namespace zoom::detail
