#pragma once

// Test-only reference implementations. Each oracle recomputes a result with
// a deliberately different algorithm than the library (position scans,
// cumulative sums, repeated subtraction) so agreement is meaningful.

#include <cstdint>
#include <vector>

#include "neuroflex/rng.hpp"

namespace oracle {

// Dense random vector: each slot nonzero with probability density, values
// uniform in [lo, hi] excluding zero.
inline std::vector<std::int8_t> random_dense(neuroflex::Rng& rng, std::size_t n,
                                             double density, int lo, int hi) {
    std::vector<std::int8_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.next_bool(density)) {
            std::int8_t v = 0;
            while (v == 0)
                v = static_cast<std::int8_t>(rng.next_int(lo, hi));
            out[i] = v;
        }
    }
    return out;
}

struct JoinRow {
    std::uint32_t position;
    std::uint32_t a_offset;
    std::uint32_t b_offset;
};

// Shared positions by direct position scan; offsets by counting nonzeros
// strictly below each position.
inline std::vector<JoinRow> join_by_scan(const std::vector<std::int8_t>& a,
                                         const std::vector<std::int8_t>& b) {
    std::vector<JoinRow> out;
    std::uint32_t a_seen = 0, b_seen = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != 0 && b[i] != 0)
            out.push_back({static_cast<std::uint32_t>(i), a_seen, b_seen});
        if (a[i] != 0) ++a_seen;
        if (b[i] != 0) ++b_seen;
    }
    return out;
}

// Exclusive prefix count of nonzeros below pos via a cumulative sum table.
inline std::vector<std::uint32_t> prefix_by_cumsum(
    const std::vector<std::int8_t>& dense,
    const std::vector<std::uint32_t>& positions) {
    std::vector<std::uint32_t> cum(dense.size() + 1, 0);
    for (std::size_t i = 0; i < dense.size(); ++i)
        cum[i + 1] = cum[i] + (dense[i] != 0 ? 1 : 0);
    std::vector<std::uint32_t> out;
    for (std::uint32_t p : positions) out.push_back(cum[p]);
    return out;
}

// Quantizer by repeated subtraction: shift by half a step, then count how
// many whole steps fit, capped at the level count, floored at zero.
inline int quantize_by_subtraction(std::int64_t acc, int levels, int threshold) {
    std::int64_t step = threshold / levels;
    std::int64_t v = acc + step / 2;
    int count = 0;
    while (v >= step && count < levels) {
        v -= step;
        ++count;
    }
    return count;
}

// Dense matrix product with per-column quantization.
inline std::vector<std::int8_t> dense_gemm_quantized(
    const std::vector<std::int8_t>& a, const std::vector<std::int8_t>& w,
    std::size_t m_rows, std::size_t k_inner, std::size_t n_cols, int levels,
    int threshold) {
    std::vector<std::int8_t> out(m_rows * n_cols, 0);
    for (std::size_t m = 0; m < m_rows; ++m) {
        for (std::size_t n = 0; n < n_cols; ++n) {
            std::int64_t acc = 0;
            for (std::size_t k = 0; k < k_inner; ++k)
                acc += std::int64_t(a[m * k_inner + k]) * w[k * n_cols + n];
            out[m * n_cols + n] = static_cast<std::int8_t>(
                quantize_by_subtraction(acc, levels, threshold));
        }
    }
    return out;
}

}  // namespace oracle
