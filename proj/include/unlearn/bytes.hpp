#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "unlearn/common.hpp"
#include "unlearn/matrix.hpp"

// Little-endian binary primitives shared by the dataset and checkpoint codecs.
namespace unlearn::bytes {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw ParseError(std::string("truncated binary field: ") + what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

inline void write_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
}

inline double read_f64(std::istream& in, const char* what) {
    const std::uint64_t bits = read_u64(in, what);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

inline void write_f32(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

inline float read_f32(std::istream& in, const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw ParseError(std::string("truncated binary field: ") + what);
    std::uint32_t bits = std::uint32_t(buf[0]) | (std::uint32_t(buf[1]) << 8) | (std::uint32_t(buf[2]) << 16) |
                         (std::uint32_t(buf[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

// Matrix block in the features.bin layout: u64 rows, u64 cols, f32 payload
// row-major.
inline void write_matrix_block(std::ostream& out, const Matrix& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows));
    write_u64(out, static_cast<std::uint64_t>(m.cols));
    for (double v : m.a) write_f32(out, static_cast<float>(v));
}

inline Matrix read_matrix_block(std::istream& in, const char* what) {
    const auto rows = static_cast<std::int64_t>(read_u64(in, what));
    const auto cols = static_cast<std::int64_t>(read_u64(in, what));
    Matrix m(rows, cols);
    for (double& v : m.a) v = static_cast<double>(read_f32(in, what));
    return m;
}

}  // namespace unlearn::bytes
