#pragma once

// Hybrid layer evaluation: each output column is computed either by the
// quantized multiply-accumulate path or by the spiking pipeline, selected
// per column by a mode mask. Both paths produce identical levels.

#include <cstdint>
#include <vector>

#include "neuroflex/bitmap.hpp"
#include "neuroflex/errors.hpp"
#include "neuroflex/quant.hpp"

namespace neuroflex {

enum class Mode : std::uint8_t { Ann = 0, Snn = 1 };

struct ModeMask {
    std::vector<Mode> modes;

    std::size_t size() const { return modes.size(); }
    Mode at(std::size_t i) const { return modes.at(i); }

    static ModeMask uniform(std::size_t n, Mode m) {
        ModeMask mask;
        mask.modes.assign(n, m);
        return mask;
    }
};

namespace detail {

inline void check_activation_levels(const BitmapVector& a_row,
                                    const QuantConfig& cfg) {
    for (std::int8_t v : a_row.values)
        if (v < 1 || v > cfg.levels)
            throw DomainError("activation level outside [1, levels]");
}

}  // namespace detail

// One output element on the multiply-accumulate path: join, accumulate in
// the 32-bit register model, quantize.
inline ActivationLevel ann_column_eval(const BitmapVector& a_row,
                                       const BitmapVector& w_col,
                                       const QuantConfig& cfg) {
    if (a_row.length() != w_col.length())
        throw DomainError("column eval: operand lengths differ");
    detail::check_activation_levels(a_row, cfg);
    MatchList ml = inner_join(a_row.bits, w_col.bits);
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < ml.size(); ++i) {
        acc += std::int64_t(a_row.values[ml.a_offsets[i]]) *
               w_col.values[ml.b_offsets[i]];
        if (acc > INT32_MAX || acc < INT32_MIN)
            throw OverflowError("accumulator exceeds 32-bit register");
    }
    return qcfs(acc, cfg);
}

// The same element on the spiking path, executed timestep by timestep:
// thermometer trains from the matched activations, gated accumulation over
// the counting window, then the soft-reset emission loop.
inline ActivationLevel snn_column_eval(const BitmapVector& a_row,
                                       const BitmapVector& w_col,
                                       const QuantConfig& cfg) {
    if (a_row.length() != w_col.length())
        throw DomainError("column eval: operand lengths differ");
    detail::check_activation_levels(a_row, cfg);
    MatchList ml = inner_join(a_row.bits, w_col.bits);
    std::vector<SpikeTrain> trains;
    trains.reserve(ml.size());
    for (std::size_t i = 0; i < ml.size(); ++i)
        trains.push_back(spike_gen(
            ActivationLevel{a_row.values[ml.a_offsets[i]]}, cfg));
    MembraneState state;
    for (int t = 0; t < cfg.window; ++t) {
        std::int64_t gated = 0;
        for (std::size_t i = 0; i < ml.size(); ++i)
            if (trains[i].spike_at(t))
                gated += w_col.values[ml.b_offsets[i]];
        state = spike_count_step(state, gated);
    }
    auto [level, end_state] = soft_reset_update(state, cfg);
    (void)end_state;
    return level;
}

inline ActivationLevel column_eval(Mode mode, const BitmapVector& a_row,
                                   const BitmapVector& w_col,
                                   const QuantConfig& cfg) {
    return mode == Mode::Ann ? ann_column_eval(a_row, w_col, cfg)
                             : snn_column_eval(a_row, w_col, cfg);
}

// Full layer: activations row major (M x K), weights column major (K x N),
// one mode per output column. Output is row major with quantized levels.
inline BitmapMatrix hybrid_gemm(const BitmapMatrix& activations,
                                const BitmapMatrix& weights,
                                const ModeMask& mask,
                                const QuantConfig& cfg) {
    if (activations.layout != Layout::RowMajor)
        throw StructuralError("hybrid_gemm: activations must be row major");
    if (weights.layout != Layout::ColMajor)
        throw StructuralError("hybrid_gemm: weights must be column major");
    if (activations.cols != weights.rows)
        throw StructuralError("hybrid_gemm: inner dimensions differ");
    if (mask.size() != weights.cols)
        throw StructuralError("hybrid_gemm: mask size does not match columns");
    activations.check_invariants();
    weights.check_invariants();

    BitmapMatrix out;
    out.rows = activations.rows;
    out.cols = weights.cols;
    out.layout = Layout::RowMajor;
    out.fibers.reserve(out.rows);
    std::vector<std::int8_t> dense_row(out.cols);
    for (std::uint32_t m = 0; m < out.rows; ++m) {
        for (std::uint32_t n = 0; n < out.cols; ++n)
            dense_row[n] = static_cast<std::int8_t>(
                column_eval(mask.at(n), activations.fibers[m],
                            weights.fibers[n], cfg)
                    .value);
        out.fibers.push_back(compress(dense_row));
    }
    return out;
}

}  // namespace neuroflex
