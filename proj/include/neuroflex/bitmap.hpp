#pragma once

// Bitmap-compressed sparse fibers and the inner-join primitives the cores
// are built around. Bit i of a sequence lives in word i/64 at position i%64,
// so byte serialization is little endian with bit 0 = position 0.

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neuroflex/errors.hpp"

namespace neuroflex {

class Bits {
public:
    Bits() = default;
    explicit Bits(std::size_t length)
        : length_(length), words_((length + 63) / 64, 0) {}

    std::size_t size() const { return length_; }
    std::size_t word_count() const { return words_.size(); }
    const std::vector<std::uint64_t>& words() const { return words_; }

    bool test(std::size_t pos) const {
        check_pos(pos);
        return (words_[pos >> 6] >> (pos & 63)) & 1u;
    }

    void set(std::size_t pos, bool value = true) {
        check_pos(pos);
        std::uint64_t mask = 1ull << (pos & 63);
        if (value)
            words_[pos >> 6] |= mask;
        else
            words_[pos >> 6] &= ~mask;
    }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    // Number of set bits strictly below pos (exclusive prefix popcount).
    std::size_t popcount_below(std::size_t pos) const {
        if (pos > length_) throw DomainError("popcount_below: position past end");
        std::size_t n = 0;
        std::size_t full = pos >> 6;
        for (std::size_t i = 0; i < full; ++i)
            n += static_cast<std::size_t>(std::popcount(words_[i]));
        std::size_t rem = pos & 63;
        if (rem)
            n += static_cast<std::size_t>(
                std::popcount(words_[full] & ((1ull << rem) - 1)));
        return n;
    }

    // Positions of set bits, ascending.
    std::vector<std::uint32_t> positions() const {
        std::vector<std::uint32_t> out;
        out.reserve(popcount());
        for (std::size_t wi = 0; wi < words_.size(); ++wi) {
            std::uint64_t w = words_[wi];
            while (w) {
                unsigned bit = static_cast<unsigned>(std::countr_zero(w));
                out.push_back(static_cast<std::uint32_t>(wi * 64 + bit));
                w &= w - 1;
            }
        }
        return out;
    }

    friend bool operator==(const Bits&, const Bits&) = default;

    // Trailing bits past the logical length must stay zero; serialization and
    // popcounts rely on it.
    void check_invariants() const {
        if (words_.size() != (length_ + 63) / 64)
            throw StructuralError("bit sequence: word storage does not match length");
        std::size_t rem = length_ & 63;
        if (rem && !words_.empty() && (words_.back() >> rem) != 0)
            throw StructuralError("bit sequence: nonzero bits past logical end");
    }

    std::uint64_t& word(std::size_t i) { return words_[i]; }
    std::uint64_t word(std::size_t i) const { return words_[i]; }

private:
    void check_pos(std::size_t pos) const {
        if (pos >= length_) throw DomainError("bit position out of range");
    }

    std::size_t length_ = 0;
    std::vector<std::uint64_t> words_;
};

// A sparse fiber: occupancy bitmap plus the nonzero values packed in
// position order. values.size() == bits.popcount() always.
struct BitmapVector {
    Bits bits;
    std::vector<std::int8_t> values;

    std::size_t length() const { return bits.size(); }
    std::size_t nonzeros() const { return values.size(); }

    void check_invariants() const {
        bits.check_invariants();
        if (values.size() != bits.popcount())
            throw StructuralError(
                "bitmap vector: packed value count does not match bitmap popcount");
        for (std::int8_t v : values)
            if (v == 0)
                throw StructuralError("bitmap vector: packed zero value");
    }
};

// Drops zeros; resulting fiber satisfies the bitmap/value pairing invariant.
inline BitmapVector compress(std::span<const std::int8_t> dense) {
    BitmapVector out;
    out.bits = Bits(dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (dense[i] != 0) {
            out.bits.set(i);
            out.values.push_back(dense[i]);
        }
    }
    return out;
}

inline std::vector<std::int8_t> decompress(const BitmapVector& v) {
    if (v.values.size() != v.bits.popcount())
        throw StructuralError("decompress: value count does not match popcount");
    std::vector<std::int8_t> out(v.length(), 0);
    std::size_t next = 0;
    for (std::uint32_t pos : v.bits.positions()) out[pos] = v.values[next++];
    return out;
}

// Join result: shared positions plus each operand's exclusive prefix
// popcount at those positions, i.e. direct indices into the packed values.
struct MatchList {
    std::vector<std::uint32_t> positions;
    std::vector<std::uint32_t> a_offsets;
    std::vector<std::uint32_t> b_offsets;

    std::size_t size() const { return positions.size(); }
};

inline MatchList inner_join(const Bits& a, const Bits& b) {
    if (a.size() != b.size())
        throw DomainError("inner_join: operand lengths differ");
    MatchList out;
    std::uint32_t a_run = 0, b_run = 0;
    for (std::size_t wi = 0; wi < a.word_count(); ++wi) {
        std::uint64_t wa = a.word(wi);
        std::uint64_t wb = b.word(wi);
        std::uint64_t both = wa & wb;
        while (both) {
            unsigned bit = static_cast<unsigned>(std::countr_zero(both));
            std::uint64_t below = (bit == 0) ? 0 : ((1ull << bit) - 1);
            out.positions.push_back(static_cast<std::uint32_t>(wi * 64 + bit));
            out.a_offsets.push_back(
                a_run + static_cast<std::uint32_t>(std::popcount(wa & below)));
            out.b_offsets.push_back(
                b_run + static_cast<std::uint32_t>(std::popcount(wb & below)));
            both &= both - 1;
        }
        a_run += static_cast<std::uint32_t>(std::popcount(wa));
        b_run += static_cast<std::uint32_t>(std::popcount(wb));
    }
    return out;
}

inline std::size_t match_count(const Bits& a, const Bits& b) {
    if (a.size() != b.size())
        throw DomainError("match_count: operand lengths differ");
    std::size_t n = 0;
    for (std::size_t wi = 0; wi < a.word_count(); ++wi)
        n += static_cast<std::size_t>(std::popcount(a.word(wi) & b.word(wi)));
    return n;
}

// Packed-value index for each queried position. Positions must be strictly
// ascending, in range, and correspond to set bits.
inline std::vector<std::uint32_t> prefix_offsets(
    const Bits& bits, std::span<const std::uint32_t> positions) {
    std::vector<std::uint32_t> out;
    out.reserve(positions.size());
    std::size_t prev_word = 0;
    std::uint32_t run = 0;
    std::uint32_t last_pos = 0;
    bool first = true;
    for (std::uint32_t pos : positions) {
        if (!first && pos <= last_pos)
            throw DomainError("prefix_offsets: positions not strictly ascending");
        if (pos >= bits.size())
            throw DomainError("prefix_offsets: position out of range");
        std::size_t wi = pos >> 6;
        while (prev_word < wi) {
            run += static_cast<std::uint32_t>(std::popcount(bits.word(prev_word)));
            ++prev_word;
        }
        std::uint64_t w = bits.word(wi);
        unsigned bit = pos & 63;
        if (!((w >> bit) & 1u))
            throw DomainError("prefix_offsets: position is not a set bit");
        std::uint64_t below = (bit == 0) ? 0 : ((1ull << bit) - 1);
        out.push_back(run + static_cast<std::uint32_t>(std::popcount(w & below)));
        last_pos = pos;
        first = false;
    }
    return out;
}

// One 128-bit streaming window of a fiber. payload holds every packed value
// whose position falls inside the window; the value crossbar moves them in
// beats of up to 16.
struct Chunk {
    static constexpr std::size_t kBits = 128;
    static constexpr std::size_t kValuesPerBeat = 16;

    std::array<std::uint64_t, 2> window{};
    std::vector<std::int8_t> payload;
    std::uint32_t seq = 0;

    std::size_t occupancy() const {
        return static_cast<std::size_t>(std::popcount(window[0])) +
               static_cast<std::size_t>(std::popcount(window[1]));
    }

    std::size_t value_beats() const {
        return (payload.size() + kValuesPerBeat - 1) / kValuesPerBeat;
    }
};

inline std::size_t chunk_count(std::size_t length) {
    return (length + Chunk::kBits - 1) / Chunk::kBits;
}

// Splits a fiber into consecutive 128-bit windows. The final window is
// zero-padded past the fiber's logical length.
inline std::vector<Chunk> chunk_iter(const BitmapVector& v) {
    std::size_t n_chunks = chunk_count(v.length());
    std::vector<Chunk> out(n_chunks);
    std::size_t value_cursor = 0;
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
        Chunk& ch = out[ci];
        ch.seq = static_cast<std::uint32_t>(ci);
        for (std::size_t half = 0; half < 2; ++half) {
            std::size_t wi = ci * 2 + half;
            ch.window[half] = wi < v.bits.word_count() ? v.bits.word(wi) : 0;
        }
        std::size_t occ = ch.occupancy();
        ch.payload.assign(v.values.begin() + static_cast<std::ptrdiff_t>(value_cursor),
                          v.values.begin() + static_cast<std::ptrdiff_t>(value_cursor + occ));
        value_cursor += occ;
    }
    if (value_cursor != v.values.size())
        throw StructuralError("chunk_iter: values left over after final window");
    return out;
}

enum class Layout : std::uint8_t { RowMajor = 0, ColMajor = 1 };

// Matrix stored as fibers. Row-major keeps one fiber per row of length cols
// (activations); col-major one fiber per column of length rows (weights).
struct BitmapMatrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    Layout layout = Layout::RowMajor;
    std::vector<BitmapVector> fibers;

    std::size_t fiber_count() const {
        return layout == Layout::RowMajor ? rows : cols;
    }
    std::size_t fiber_length() const {
        return layout == Layout::RowMajor ? cols : rows;
    }

    std::size_t nonzeros() const {
        std::size_t n = 0;
        for (const auto& f : fibers) n += f.nonzeros();
        return n;
    }

    void check_invariants() const {
        if (fibers.size() != fiber_count())
            throw StructuralError("matrix: fiber count does not match shape");
        for (const auto& f : fibers) {
            if (f.length() != fiber_length())
                throw StructuralError("matrix: fiber length does not match shape");
            f.check_invariants();
        }
    }

    static BitmapMatrix from_dense(std::uint32_t rows, std::uint32_t cols,
                                   Layout layout,
                                   std::span<const std::int8_t> row_major_data) {
        if (row_major_data.size() != std::size_t(rows) * cols)
            throw StructuralError("from_dense: data size does not match shape");
        BitmapMatrix m;
        m.rows = rows;
        m.cols = cols;
        m.layout = layout;
        if (layout == Layout::RowMajor) {
            m.fibers.reserve(rows);
            for (std::uint32_t r = 0; r < rows; ++r)
                m.fibers.push_back(
                    compress(row_major_data.subspan(std::size_t(r) * cols, cols)));
        } else {
            m.fibers.reserve(cols);
            std::vector<std::int8_t> col(rows);
            for (std::uint32_t c = 0; c < cols; ++c) {
                for (std::uint32_t r = 0; r < rows; ++r)
                    col[r] = row_major_data[std::size_t(r) * cols + c];
                m.fibers.push_back(compress(col));
            }
        }
        return m;
    }

    std::vector<std::int8_t> to_dense() const {
        check_invariants();
        std::vector<std::int8_t> out(std::size_t(rows) * cols, 0);
        if (layout == Layout::RowMajor) {
            for (std::uint32_t r = 0; r < rows; ++r) {
                auto dense = decompress(fibers[r]);
                for (std::uint32_t c = 0; c < cols; ++c)
                    out[std::size_t(r) * cols + c] = dense[c];
            }
        } else {
            for (std::uint32_t c = 0; c < cols; ++c) {
                auto dense = decompress(fibers[c]);
                for (std::uint32_t r = 0; r < rows; ++r)
                    out[std::size_t(r) * cols + c] = dense[r];
            }
        }
        return out;
    }
};

}  // namespace neuroflex
