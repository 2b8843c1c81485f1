#pragma once

// Binary matrix container. Layout on disk, all integers little endian:
//   "NFBM"  u32 version=1  u32 rows  u32 cols  u8 layout
//   then per fiber: u32 length, ceil(length/8) bitmap bytes
//   (bit j of byte i = position 8i+j), then popcount(bitmap) int8 values.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "neuroflex/bitmap.hpp"
#include "neuroflex/errors.hpp"

namespace neuroflex {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw StructuralError("matrix file: truncated integer field");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace detail

inline void write_matrix(std::ostream& os, const BitmapMatrix& m) {
    m.check_invariants();
    os.write("NFBM", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, m.rows);
    detail::put_u32(os, m.cols);
    os.put(static_cast<char>(m.layout));
    for (const auto& fiber : m.fibers) {
        detail::put_u32(os, static_cast<std::uint32_t>(fiber.length()));
        std::size_t n_bytes = (fiber.length() + 7) / 8;
        for (std::size_t bi = 0; bi < n_bytes; ++bi) {
            std::uint64_t w = fiber.bits.word(bi / 8);
            os.put(static_cast<char>((w >> (8 * (bi % 8))) & 0xff));
        }
        os.write(reinterpret_cast<const char*>(fiber.values.data()),
                 static_cast<std::streamsize>(fiber.values.size()));
    }
    if (!os) throw IoError("matrix file: write failed");
}

inline BitmapMatrix read_matrix(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "NFBM")
        throw StructuralError("matrix file: bad magic");
    std::uint32_t version = detail::get_u32(is);
    if (version != 1)
        throw StructuralError("matrix file: unsupported version " +
                              std::to_string(version));
    BitmapMatrix m;
    m.rows = detail::get_u32(is);
    m.cols = detail::get_u32(is);
    int layout_byte = is.get();
    if (layout_byte != 0 && layout_byte != 1)
        throw StructuralError("matrix file: bad layout flag");
    m.layout = static_cast<Layout>(layout_byte);
    std::size_t expect_len = m.layout == Layout::RowMajor ? m.cols : m.rows;
    std::size_t n_fibers = m.layout == Layout::RowMajor ? m.rows : m.cols;
    m.fibers.reserve(n_fibers);
    for (std::size_t fi = 0; fi < n_fibers; ++fi) {
        std::uint32_t len = detail::get_u32(is);
        if (len != expect_len)
            throw StructuralError("matrix file: fiber length does not match shape");
        BitmapVector v;
        v.bits = Bits(len);
        std::size_t n_bytes = (len + 7) / 8;
        for (std::size_t bi = 0; bi < n_bytes; ++bi) {
            int byte = is.get();
            if (byte < 0) throw StructuralError("matrix file: truncated bitmap");
            if (bi / 8 < v.bits.word_count())
                v.bits.word(bi / 8) |= std::uint64_t(byte & 0xff) << (8 * (bi % 8));
        }
        v.bits.check_invariants();
        std::size_t nnz = v.bits.popcount();
        v.values.resize(nnz);
        is.read(reinterpret_cast<char*>(v.values.data()),
                static_cast<std::streamsize>(nnz));
        if (!is && nnz > 0)
            throw StructuralError("matrix file: truncated values");
        v.check_invariants();
        m.fibers.push_back(std::move(v));
    }
    is.peek();
    if (!is.eof()) throw StructuralError("matrix file: trailing bytes");
    m.check_invariants();
    return m;
}

inline void save_matrix(const std::filesystem::path& path, const BitmapMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_matrix(os, m);
}

inline BitmapMatrix load_matrix(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return read_matrix(is);
}

}  // namespace neuroflex
