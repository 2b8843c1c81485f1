#pragma once

// Integer-exact quantized activation and its spiking counterpart. The
// clip-floor-shift quantizer and the thermometer-coded spike pipeline agree
// bit for bit whenever the divisibility preconditions hold, so the two
// execution modes are interchangeable per output element.

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "neuroflex/errors.hpp"

namespace neuroflex {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

struct QuantConfig {
    int levels = 0;           // L, quantization levels and spike window length
    int threshold = 0;        // firing threshold, INT8 range
    int step = 0;             // threshold / levels, integral by precondition
    int window = 0;           // spike-count timesteps, equal to levels
    int total_timesteps = 0;  // generation + counting overlap + soft reset

    static QuantConfig make(int levels, int threshold) {
        if (levels < 1)
            throw DomainError("quant config: levels must be positive");
        if (levels > 8)
            throw DomainError(
                "quant config: levels exceed the eight-timestep train register");
        if (threshold < 1 || threshold > 127)
            throw RangeError("quant config: threshold outside int8 range");
        if (threshold % levels != 0)
            throw PreconditionError(
                "quant config: threshold/levels not an integer");
        QuantConfig cfg;
        cfg.levels = levels;
        cfg.threshold = threshold;
        cfg.step = threshold / levels;
        cfg.window = levels;
        cfg.total_timesteps = 3 * levels - 1;
        return cfg;
    }
};

struct ActivationLevel {
    int value = 0;
    friend bool operator==(const ActivationLevel&, const ActivationLevel&) = default;
};

// Clip-floor-shift quantizer on an integer accumulator. The half-step shift
// uses floor(step/2) so the spiking pipeline can apply the identical offset.
inline ActivationLevel qcfs(std::int64_t acc, const QuantConfig& cfg) {
    std::int64_t q = floor_div(acc + cfg.step / 2, cfg.step);
    if (q < 0) q = 0;
    if (q > cfg.levels) q = cfg.levels;
    return ActivationLevel{static_cast<int>(q)};
}

// Thermometer code: bit t set iff t < level, over a window of cfg.window bits.
struct SpikeTrain {
    std::uint32_t bits = 0;
    int length = 0;

    bool spike_at(int t) const { return (bits >> t) & 1u; }
    int count() const { return std::popcount(bits); }
};

inline SpikeTrain spike_gen(ActivationLevel level, const QuantConfig& cfg) {
    if (level.value < 0 || level.value > cfg.levels)
        throw DomainError("spike_gen: level outside [0, levels]");
    SpikeTrain t;
    t.length = cfg.window;
    t.bits = (level.value == 0) ? 0u : ((1u << level.value) - 1u);
    return t;
}

// Decodes a thermometer train back to its level; rejects non-thermometer
// patterns so corrupted trains cannot alias a valid level.
inline ActivationLevel spike_decode(const SpikeTrain& t) {
    if (t.bits >> t.length)
        throw StructuralError("spike train: bits past window end");
    int level = std::popcount(t.bits);
    std::uint32_t expect = (level == 0) ? 0u : ((1u << level) - 1u);
    if (t.bits != expect)
        throw StructuralError("spike train: not thermometer coded");
    return ActivationLevel{level};
}

// Membrane accumulator mirrors the 32-bit hardware register.
struct MembraneState {
    std::int64_t potential = 0;
    int emitted = 0;
};

inline MembraneState spike_count_step(MembraneState state,
                                      std::int64_t weighted_input) {
    state.potential += weighted_input;
    if (state.potential > INT32_MAX || state.potential < INT32_MIN)
        throw OverflowError("membrane potential exceeds 32-bit accumulator");
    return state;
}

// Soft reset: the rounding pre-shift is applied once, then the threshold is
// subtracted once per emitted spike across exactly cfg.levels steps. The
// emitted count equals qcfs(potential) for every integer potential.
inline std::pair<ActivationLevel, MembraneState> soft_reset_update(
    MembraneState state, const QuantConfig& cfg) {
    std::int64_t v = state.potential + cfg.step / 2;
    int emitted = 0;
    for (int i = 0; i < cfg.levels; ++i) {
        if (v >= cfg.step) {
            v -= cfg.step;
            ++emitted;
        }
    }
    state.potential = v;
    state.emitted = emitted;
    return {ActivationLevel{emitted}, state};
}

struct BatchNormParams {
    int gamma = 1;     // learned scale
    int beta = 0;      // learned shift
    int mean = 0;      // running mean
    int variance = 1;  // running variance
    int epsilon = 0;
    int bias = 0;      // preceding layer bias folded in the same pass
};

struct FoldedAffine {
    int scale = 1;
    int offset = 0;
};

inline int exact_isqrt(int n) {
    if (n < 0) return -1;
    int r = static_cast<int>(std::sqrt(static_cast<double>(n)));
    while (r > 0 && std::int64_t(r) * r > n) --r;
    while (std::int64_t(r + 1) * (r + 1) <= n) ++r;
    return (std::int64_t(r) * r == n) ? r : -1;
}

// Folds batch normalization and bias into an integer affine pair. Each
// divisibility condition is checked separately so the failure names the
// quantity that broke exactness.
inline FoldedAffine fold_batchnorm(const BatchNormParams& p,
                                   const QuantConfig& cfg) {
    if (p.bias % cfg.levels != 0)
        throw PreconditionError("fold: bias/levels not an integer");
    if (p.mean % cfg.levels != 0)
        throw PreconditionError("fold: mean/levels not an integer");
    if (p.beta % cfg.levels != 0)
        throw PreconditionError("fold: shift/levels not an integer");
    int root = exact_isqrt(p.variance + p.epsilon);
    if (root <= 0)
        throw PreconditionError(
            "fold: variance+epsilon is not a positive perfect square");
    if (p.gamma % root != 0)
        throw PreconditionError("fold: scale/stddev not an integer");
    std::int64_t scale = p.gamma / root;
    std::int64_t offset = scale * (std::int64_t(p.bias) - p.mean) + p.beta;
    if (scale < INT8_MIN || scale > INT8_MAX)
        throw RangeError("fold: folded scale exceeds int8");
    if (offset < INT8_MIN || offset > INT8_MAX)
        throw RangeError("fold: folded offset exceeds int8");
    return FoldedAffine{static_cast<int>(scale), static_cast<int>(offset)};
}

struct InputLayerReport {
    bool ok = true;
    std::vector<std::string> violations;
};

// Direct-coded input layers repeat the same current every timestep, so
// exactness only needs the quantizer preconditions to hold. Collects every
// violation instead of stopping at the first.
inline InputLayerReport check_input_layer(int levels, int threshold) {
    InputLayerReport report;
    auto fail = [&](const std::string& msg) {
        report.ok = false;
        report.violations.push_back(msg);
    };
    if (levels < 1) fail("levels must be positive");
    if (levels > 8) fail("levels exceed the eight-timestep train register");
    if (threshold < 1 || threshold > 127) fail("threshold outside int8 range");
    if (levels >= 1 && threshold % levels != 0)
        fail("threshold/levels not an integer");
    return report;
}

}  // namespace neuroflex
