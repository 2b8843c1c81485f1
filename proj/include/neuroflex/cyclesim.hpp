#pragma once

// Cycle-level model of the dual-core accelerator. One PE executes one
// column stream at a time: per output column, the activation rows stream
// through chunk-aligned inner joins against the column's weight fiber.
// Timing follows the PE pipeline contracts; the memory side models the
// shared fiber cache at line granularity with reuse-priority replacement,
// crossbar beats per delivered chunk, bank conflicts in slot lockstep, and
// HBM as a flat-bandwidth pipe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "neuroflex/bitmap.hpp"
#include "neuroflex/cost.hpp"
#include "neuroflex/errors.hpp"
#include "neuroflex/gemm.hpp"
#include "neuroflex/quant.hpp"

namespace neuroflex {

struct HardwareConfig {
    int snn_pes = 16;
    int ann_pes = 16;
    std::int64_t cache_bytes = 512 * 1024;
    int cache_banks = 32;
    int cache_assoc = 32;
    int cache_line_bytes = 32;
    int chunk_bits = 128;
    double clock_hz = 560e6;
    double hbm_bytes_per_cycle = 128e9 / 560e6;
    int inner_join_units = 32;  // one per PE, informational
    int launch_cycles = 16;
    int hbm_first_access_cycles = 100;
    // Charges the two-cycle pipeline warm-up per chunk instead of per
    // column stream; off by default (see the open timing question).
    bool warmup_per_chunk = false;

    void validate() const {
        if (snn_pes < 0 || ann_pes < 0)
            throw DomainError("hardware: negative PE count");
        if (snn_pes + ann_pes <= 0)
            throw DomainError("hardware: no PEs configured");
        if (cache_bytes <= 0 || cache_banks <= 0 || cache_assoc <= 0 ||
            cache_line_bytes <= 0 || clock_hz <= 0 ||
            hbm_bytes_per_cycle <= 0 || inner_join_units <= 0 ||
            launch_cycles < 0 || hbm_first_access_cycles < 0)
            throw DomainError("hardware: non-positive parameter");
        if (chunk_bits != 128)
            throw DomainError("hardware: chunk width is fixed at 128 bits");
    }
};

inline constexpr int kLaggyPrefixCycles = 8;  // offset FIFO fill depth

struct EnergyWeights {
    double cache_access = 0.0;       // per cache line delivered
    double hbm_byte = 0.0;           // per byte moved from DRAM
    double crossbar_beat = 0.0;      // per beat: bitmap, or up to 16 values
    double fast_prefix = 0.0;        // per chunk through a fast prefix unit
    double laggy_prefix = 0.0;       // per chunk through the laggy unit
    double mac = 0.0;                // per matched multiply-accumulate
    double gated_accumulate = 0.0;   // per spike-gated add
    double spike_gen = 0.0;          // per matched activation encoded
    double qcfs_eval = 0.0;          // per quantizer application
    double soft_reset_step = 0.0;    // per reset step per output element
    double control_per_cycle = 0.0;  // per busy PE cycle

    // Relative activation-unit costs for comparison reporting.
    double relu_eval() const { return 0.8 * qcfs_eval; }
    double lif_step() const { return 0.4 * soft_reset_step; }

    void validate() const {
        for (double w : {cache_access, hbm_byte, crossbar_beat, fast_prefix,
                         laggy_prefix, mac, gated_accumulate, spike_gen,
                         qcfs_eval, soft_reset_step, control_per_cycle})
            if (w < 0) throw DomainError("energy weights: negative weight");
    }

    static EnergyWeights defaults();
};

// Default per-event weights, fitted so the reference workloads reproduce
// the published power split (cache-dominated, ANN core about four times the
// SNN core) while keeping activation units under one percent.
inline EnergyWeights EnergyWeights::defaults() {
    EnergyWeights w;
    w.cache_access = 5.0;
    w.hbm_byte = 10.0;
    w.crossbar_beat = 1.0;
    w.fast_prefix = 1.0;
    w.laggy_prefix = 1.0;
    w.mac = 1.0;
    w.gated_accumulate = 0.1;
    w.spike_gen = 0.1;
    w.qcfs_eval = 1.0;
    w.soft_reset_step = 0.25;
    w.control_per_cycle = 0.05;
    return w;
}

// Pipeline timing. A column stream is the concatenation of all row joins
// for one output column; warm-up, the quantizer drain stage and the spiking
// epilogues are charged once per stream, one bubble between consecutive
// chunks, one cycle per matched nonzero.
inline std::int64_t ann_pe_cycles(const std::vector<std::int64_t>& match_counts,
                                  bool warmup_per_chunk = false) {
    if (match_counts.empty()) return 0;
    std::int64_t chunks = static_cast<std::int64_t>(match_counts.size());
    std::int64_t matches = 0;
    for (std::int64_t m : match_counts) matches += m;
    std::int64_t warmup = warmup_per_chunk ? 2 * chunks : 2;
    return warmup + matches + (chunks - 1) + 1;
}

inline std::int64_t snn_pe_cycles(const std::vector<std::int64_t>& match_counts,
                                  const QuantConfig& cfg,
                                  bool warmup_per_chunk = false) {
    if (match_counts.empty()) return 0;
    std::int64_t chunks = static_cast<std::int64_t>(match_counts.size());
    std::int64_t matches = 0;
    for (std::int64_t m : match_counts) matches += m;
    std::int64_t warmup = warmup_per_chunk ? 2 * chunks : 2;
    return warmup + kLaggyPrefixCycles + matches + (chunks - 1) +
           (cfg.levels - 1) + cfg.levels;
}

struct SimReport {
    std::int64_t total_cycles = 0;
    std::int64_t launch_cycles = 0;
    std::int64_t stall_cycles = 0;  // bank conflicts plus capacity refetch
    std::int64_t fetch_exposed_cycles = 0;  // network-level fetch not hidden
    std::vector<std::int64_t> snn_busy;
    std::vector<std::int64_t> ann_busy;
    std::map<std::string, double> energy;

    std::int64_t total_matches = 0;
    std::int64_t cache_accesses = 0;
    std::int64_t cache_capacity_miss_bytes = 0;
    std::int64_t bank_conflicts = 0;
    std::int64_t hbm_bytes = 0;

    double total_energy() const {
        double sum = 0.0;
        for (const auto& [key, value] : energy) sum += value;
        return sum;
    }

    double edp() const {
        return total_energy() * static_cast<double>(total_cycles);
    }
};

inline double utilization(const SimReport& report) {
    std::int64_t busy = 0;
    for (std::int64_t b : report.snn_busy) busy += b;
    for (std::int64_t b : report.ann_busy) busy += b;
    std::size_t pes = report.snn_busy.size() + report.ann_busy.size();
    if (pes == 0 || report.total_cycles <= 0) return 0.0;
    return static_cast<double>(busy) /
           (static_cast<double>(report.total_cycles) * static_cast<double>(pes));
}

struct PowerBreakdown {
    double cache_share = 0.0;  // fiber cache plus crossbar
    double ann_share = 0.0;
    double snn_share = 0.0;
    std::map<std::string, double> groups;  // raw on-chip energy by group
};

// Shares normalize on-chip energy only: the fiber cache group (cache lines
// plus crossbar beats) and the two cores. DRAM bytes are off-chip and kept
// out of the share trio; shares sum to 100 exactly by construction.
inline PowerBreakdown power_breakdown(const SimReport& report) {
    auto at = [&](const std::string& key) {
        auto it = report.energy.find(key);
        return it == report.energy.end() ? 0.0 : it->second;
    };
    PowerBreakdown out;
    double cache = at("cache.access") + at("cache.crossbar");
    double ann = at("ann.prefix") + at("ann.compute") + at("ann.activation") +
                 at("ann.control");
    double snn = at("snn.prefix") + at("snn.compute") + at("snn.activation") +
                 at("snn.control");
    out.groups["cache"] = cache;
    out.groups["ann"] = ann;
    out.groups["snn"] = snn;
    double total = cache + ann + snn;
    if (total > 0.0) {
        out.ann_share = 100.0 * ann / total;
        out.snn_share = 100.0 * snn / total;
        out.cache_share = 100.0 - out.ann_share - out.snn_share;
    }
    return out;
}

struct LayerJob {
    const BitmapMatrix* activations = nullptr;
    const BitmapMatrix* weights = nullptr;
    QuantConfig quant;
    const Assignment* schedule = nullptr;
};

namespace simdetail {

// Byte layout of a fiber in the cache/HBM: 16 bitmap bytes per chunk plus
// the packed values of that chunk, chunks back to back. Fibers start on a
// cache line boundary.
inline std::int64_t fiber_bytes(const BitmapVector& f) {
    return static_cast<std::int64_t>(chunk_count(f.length())) * 16 +
           static_cast<std::int64_t>(f.nonzeros());
}

inline std::int64_t padded_fiber_bytes(const BitmapVector& f, int line_bytes) {
    std::int64_t raw = fiber_bytes(f);
    std::int64_t lines = (raw + line_bytes - 1) / line_bytes;
    return lines * line_bytes;
}

struct FiberAddressing {
    // Per fiber, per chunk: first cache line id of the chunk and the line
    // count it spans.
    std::vector<std::vector<std::int64_t>> first_line;
    std::vector<std::vector<std::int32_t>> line_span;
    std::int64_t total_bytes = 0;

    void add_matrix(const BitmapMatrix& m, int line_bytes) {
        for (const auto& f : m.fibers) {
            std::vector<std::int64_t> firsts;
            std::vector<std::int32_t> spans;
            std::int64_t offset = total_bytes;
            for (const Chunk& ch : chunk_iter(f)) {
                std::int64_t bytes = 16 + static_cast<std::int64_t>(ch.payload.size());
                std::int64_t first = offset / line_bytes;
                std::int64_t last = (offset + bytes - 1) / line_bytes;
                firsts.push_back(first);
                spans.push_back(static_cast<std::int32_t>(last - first + 1));
                offset += bytes;
            }
            first_line.push_back(std::move(firsts));
            line_span.push_back(std::move(spans));
            total_bytes += padded_fiber_bytes(f, line_bytes);
        }
    }
};

// Set-associative cache with reuse-priority replacement: victim is the line
// with the fewest remaining uses, ties broken least-recently-touched.
class FiberCacheModel {
public:
    FiberCacheModel(std::int64_t cache_bytes, int line_bytes, int assoc)
        : assoc_(assoc) {
        std::int64_t lines = cache_bytes / line_bytes;
        std::int64_t sets = std::max<std::int64_t>(1, lines / assoc);
        sets_.resize(static_cast<std::size_t>(sets));
    }

    // Returns true on hit. remaining_uses counts touches after this one.
    bool touch(std::int64_t line_id, std::int64_t remaining_uses) {
        ++clock_;
        auto& set = sets_[static_cast<std::size_t>(
            line_id % static_cast<std::int64_t>(sets_.size()))];
        for (auto& way : set) {
            if (way.line == line_id) {
                way.remaining = remaining_uses;
                way.last_touch = clock_;
                return true;
            }
        }
        if (set.size() < static_cast<std::size_t>(assoc_)) {
            set.push_back({line_id, remaining_uses, clock_});
            return false;
        }
        std::size_t victim = 0;
        for (std::size_t i = 1; i < set.size(); ++i) {
            if (set[i].remaining < set[victim].remaining ||
                (set[i].remaining == set[victim].remaining &&
                 set[i].last_touch < set[victim].last_touch))
                victim = i;
        }
        set[victim] = {line_id, remaining_uses, clock_};
        return false;
    }

private:
    struct Way {
        std::int64_t line = -1;
        std::int64_t remaining = 0;
        std::int64_t last_touch = 0;
    };
    int assoc_;
    std::int64_t clock_ = 0;
    std::vector<std::vector<Way>> sets_;
};

struct ColumnWork {
    std::int64_t cycles = 0;
    std::int64_t matches = 0;
    std::int64_t spike_sum = 0;  // total spikes over matched activations
};

}  // namespace simdetail

struct LayerResult {
    SimReport report;
    BitmapMatrix output;
};

inline LayerResult simulate_layer(const LayerJob& job, const HardwareConfig& hw,
                                  const EnergyWeights& weights) {
    hw.validate();
    weights.validate();
    if (!job.activations || !job.weights || !job.schedule)
        throw StructuralError("simulate_layer: missing operand or schedule");
    const BitmapMatrix& a = *job.activations;
    const BitmapMatrix& b = *job.weights;
    const Assignment& schedule = *job.schedule;
    if (a.layout != Layout::RowMajor || b.layout != Layout::ColMajor)
        throw StructuralError("simulate_layer: operand layouts are wrong");
    if (a.cols != b.rows)
        throw StructuralError("simulate_layer: inner dimensions differ");
    if (schedule.to_snn.size() != b.cols || !schedule.packed)
        throw StructuralError("simulate_layer: schedule does not cover operands");
    if (schedule.snn_packing.pe_columns.size() !=
            static_cast<std::size_t>(hw.snn_pes) ||
        schedule.ann_packing.pe_columns.size() !=
            static_cast<std::size_t>(hw.ann_pes))
        throw StructuralError("simulate_layer: schedule PE count differs from hardware");

    const std::size_t M = a.rows, N = b.cols;
    const std::size_t c = chunk_count(a.fiber_length());

    SimReport rpt;
    rpt.snn_busy.assign(static_cast<std::size_t>(hw.snn_pes), 0);
    rpt.ann_busy.assign(static_cast<std::size_t>(hw.ann_pes), 0);

    // Per-chunk activation occupancy, shared across every column.
    std::vector<std::vector<std::int32_t>> a_chunk_nnz(M);
    std::int64_t a_beats = 0;   // crossbar beats for one full activation pass
    std::int64_t a_lines = 0;   // cache lines for one full activation pass
    simdetail::FiberAddressing addr;
    addr.add_matrix(a, hw.cache_line_bytes);
    std::size_t b_addr_base = a.fibers.size();
    addr.add_matrix(b, hw.cache_line_bytes);
    for (std::size_t m = 0; m < M; ++m) {
        auto chunks = chunk_iter(a.fibers[m]);
        auto& nnz = a_chunk_nnz[m];
        nnz.reserve(chunks.size());
        for (const Chunk& ch : chunks) {
            nnz.push_back(static_cast<std::int32_t>(ch.occupancy()));
            a_beats += 1 + static_cast<std::int64_t>(ch.value_beats());
        }
        for (std::int32_t span : addr.line_span[m]) a_lines += span;
    }

    std::vector<std::int64_t> b_beats(N, 0), b_lines(N, 0);
    for (std::size_t n = 0; n < N; ++n) {
        for (const Chunk& ch : chunk_iter(b.fibers[n]))
            b_beats[n] += 1 + static_cast<std::int64_t>(ch.value_beats());
        for (std::int32_t span : addr.line_span[b_addr_base + n])
            b_lines[n] += span;
    }

    // Column work: matches per chunk over the whole stream feed the pipeline
    // ops; matched activation levels are summed for spike-event energy.
    std::vector<simdetail::ColumnWork> work(N);
    std::vector<std::int64_t> stream_counts;
    for (std::size_t n = 0; n < N; ++n) {
        const BitmapVector& col = b.fibers[n];
        bool snn = schedule.to_snn[n] != 0;
        stream_counts.clear();
        stream_counts.reserve(M * c);
        std::int64_t spike_sum = 0;
        for (std::size_t m = 0; m < M; ++m) {
            const BitmapVector& row = a.fibers[m];
            MatchList ml = inner_join(row.bits, col.bits);
            work[n].matches += static_cast<std::int64_t>(ml.size());
            if (snn)
                for (std::uint32_t off : ml.a_offsets)
                    spike_sum += row.values[off];
            // Split the row's matches into per-chunk counts.
            std::size_t cursor = 0;
            for (std::size_t ci = 0; ci < c; ++ci) {
                std::uint32_t limit = static_cast<std::uint32_t>((ci + 1) * Chunk::kBits);
                std::int64_t count = 0;
                while (cursor < ml.positions.size() && ml.positions[cursor] < limit) {
                    ++count;
                    ++cursor;
                }
                stream_counts.push_back(count);
            }
        }
        work[n].spike_sum = spike_sum;
        work[n].cycles = snn ? snn_pe_cycles(stream_counts, job.quant,
                                             hw.warmup_per_chunk)
                             : ann_pe_cycles(stream_counts, hw.warmup_per_chunk);
        rpt.total_matches += work[n].matches;
    }

    // Per-PE queues run their columns back to back in dispatch order.
    auto run_core = [&](const CorePacking& packing,
                        std::vector<std::int64_t>& busy) {
        for (std::size_t p = 0; p < packing.pe_columns.size(); ++p)
            for (std::uint32_t col : packing.pe_columns[p])
                busy[p] += work[col].cycles;
    };
    run_core(schedule.snn_packing, rpt.snn_busy);
    run_core(schedule.ann_packing, rpt.ann_busy);

    // Cache stream in canonical wave order: per activation row, the shared
    // broadcast lines once, then every column's weight lines for that wave.
    // Weight lines carry M remaining uses, activation lines one.
    simdetail::FiberCacheModel cache(hw.cache_bytes, hw.cache_line_bytes,
                                     hw.cache_assoc);
    std::int64_t capacity_miss_bytes = 0;
    std::int64_t compulsory_bytes = 0;
    {
        std::vector<std::uint8_t> seen_line_hint;  // grows on demand
        auto classify = [&](std::int64_t line, std::int64_t remaining) {
            bool hit = cache.touch(line, remaining);
            if (hit) return;
            std::size_t idx = static_cast<std::size_t>(line);
            if (seen_line_hint.size() <= idx) seen_line_hint.resize(idx + 1, 0);
            if (seen_line_hint[idx])
                capacity_miss_bytes += hw.cache_line_bytes;
            else {
                seen_line_hint[idx] = 1;
                compulsory_bytes += hw.cache_line_bytes;
            }
        };
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                std::int64_t first = addr.first_line[m][ci];
                for (std::int32_t s = 0; s < addr.line_span[m][ci]; ++s)
                    classify(first + s, 0);
            }
            for (std::size_t n = 0; n < N; ++n) {
                std::size_t fi = b_addr_base + n;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    std::int64_t first = addr.first_line[fi][ci];
                    std::int64_t remaining = static_cast<std::int64_t>(M - 1 - m);
                    for (std::int32_t s = 0; s < addr.line_span[fi][ci]; ++s)
                        classify(first + s, remaining);
                }
            }
        }
    }
    rpt.cache_capacity_miss_bytes = capacity_miss_bytes;

    // Bank conflicts in slot lockstep: PEs at the same queue position stream
    // together; per wave and chunk step, simultaneous first-line accesses
    // landing in one bank serialize, one stall cycle per extra access.
    {
        std::size_t max_slot = 0;
        for (const auto& pe : schedule.snn_packing.pe_columns)
            max_slot = std::max(max_slot, pe.size());
        for (const auto& pe : schedule.ann_packing.pe_columns)
            max_slot = std::max(max_slot, pe.size());
        std::vector<std::int32_t> bank_count(
            static_cast<std::size_t>(hw.cache_banks), 0);
        for (std::size_t slot = 0; slot < max_slot; ++slot) {
            std::vector<std::uint32_t> active;
            for (const auto& pe : schedule.snn_packing.pe_columns)
                if (slot < pe.size()) active.push_back(pe[slot]);
            for (const auto& pe : schedule.ann_packing.pe_columns)
                if (slot < pe.size()) active.push_back(pe[slot]);
            if (active.empty()) continue;
            for (std::size_t ci = 0; ci < c; ++ci) {
                std::fill(bank_count.begin(), bank_count.end(), 0);
                for (std::uint32_t n : active) {
                    std::int64_t line = addr.first_line[b_addr_base + n][ci];
                    ++bank_count[static_cast<std::size_t>(
                        line % hw.cache_banks)];
                }
                // One broadcast port read per wave joins the same step.
                std::int64_t a_line = addr.first_line[0][ci];
                ++bank_count[static_cast<std::size_t>(a_line % hw.cache_banks)];
                for (std::int32_t cnt : bank_count)
                    if (cnt > 1) rpt.bank_conflicts += cnt - 1;
            }
        }
    }

    // Energy accounting, attributed per consuming column.
    double e_cache = 0.0, e_xbar = 0.0;
    double e_ann_prefix = 0.0, e_ann_compute = 0.0, e_ann_act = 0.0,
           e_ann_ctrl = 0.0;
    double e_snn_prefix = 0.0, e_snn_compute = 0.0, e_snn_act = 0.0,
           e_snn_ctrl = 0.0;
    std::int64_t chunk_steps = static_cast<std::int64_t>(M) *
                               static_cast<std::int64_t>(c);
    for (std::size_t n = 0; n < N; ++n) {
        bool snn = schedule.to_snn[n] != 0;
        std::int64_t lines = a_lines + static_cast<std::int64_t>(M) * b_lines[n];
        std::int64_t beats = a_beats + static_cast<std::int64_t>(M) * b_beats[n];
        rpt.cache_accesses += lines;
        e_cache += weights.cache_access * static_cast<double>(lines);
        e_xbar += weights.crossbar_beat * static_cast<double>(beats);
        if (snn) {
            e_snn_prefix += weights.fast_prefix * static_cast<double>(chunk_steps) +
                            weights.laggy_prefix * static_cast<double>(chunk_steps);
            e_snn_compute +=
                weights.gated_accumulate * static_cast<double>(work[n].spike_sum);
            e_snn_act += weights.spike_gen * static_cast<double>(work[n].matches) +
                         weights.soft_reset_step *
                             static_cast<double>(job.quant.levels) *
                             static_cast<double>(M);
            e_snn_ctrl +=
                weights.control_per_cycle * static_cast<double>(work[n].cycles);
        } else {
            e_ann_prefix +=
                2.0 * weights.fast_prefix * static_cast<double>(chunk_steps);
            e_ann_compute += weights.mac * static_cast<double>(work[n].matches);
            e_ann_act += weights.qcfs_eval * static_cast<double>(M);
            e_ann_ctrl +=
                weights.control_per_cycle * static_cast<double>(work[n].cycles);
        }
    }

    std::int64_t refetch_stall = static_cast<std::int64_t>(
        std::ceil(static_cast<double>(capacity_miss_bytes) /
                  hw.hbm_bytes_per_cycle));
    rpt.hbm_bytes = capacity_miss_bytes;  // layer-local refetch traffic
    rpt.stall_cycles = rpt.bank_conflicts + refetch_stall;
    rpt.launch_cycles = hw.launch_cycles;

    std::int64_t max_busy = 0;
    for (std::int64_t v : rpt.snn_busy) max_busy = std::max(max_busy, v);
    for (std::int64_t v : rpt.ann_busy) max_busy = std::max(max_busy, v);
    rpt.total_cycles = hw.launch_cycles + max_busy + rpt.stall_cycles;

    rpt.energy["cache.access"] = e_cache;
    rpt.energy["cache.crossbar"] = e_xbar;
    rpt.energy["hbm.bytes"] =
        weights.hbm_byte * static_cast<double>(rpt.hbm_bytes);
    rpt.energy["ann.prefix"] = e_ann_prefix;
    rpt.energy["ann.compute"] = e_ann_compute;
    rpt.energy["ann.activation"] = e_ann_act;
    rpt.energy["ann.control"] = e_ann_ctrl;
    rpt.energy["snn.prefix"] = e_snn_prefix;
    rpt.energy["snn.compute"] = e_snn_compute;
    rpt.energy["snn.activation"] = e_snn_act;
    rpt.energy["snn.control"] = e_snn_ctrl;

    // Functional result comes from the exact evaluator; the simulator never
    // produces values of its own.
    ModeMask mask;
    mask.modes.reserve(N);
    for (std::size_t n = 0; n < N; ++n)
        mask.modes.push_back(schedule.to_snn[n] ? Mode::Snn : Mode::Ann);
    LayerResult result{std::move(rpt), hybrid_gemm(a, b, mask, job.quant)};
    return result;
}

struct NetworkResult {
    SimReport report;
    std::vector<BitmapMatrix> outputs;
    std::vector<SimReport> layer_reports;
};

// Layers run in order; the next layer's weight fetch overlaps the current
// layer's compute (double buffering). The first layer pays the full operand
// fetch; later activations are treated as produced on chip.
inline NetworkResult simulate_network(const std::vector<LayerJob>& jobs,
                                      const HardwareConfig& hw,
                                      const EnergyWeights& weights) {
    if (jobs.empty()) throw DomainError("simulate_network: no layers");
    NetworkResult result;
    std::vector<std::int64_t> fetch_bytes(jobs.size(), 0);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        std::int64_t bytes = 0;
        for (const auto& f : jobs[i].weights->fibers)
            bytes += simdetail::padded_fiber_bytes(f, hw.cache_line_bytes);
        if (i == 0)
            for (const auto& f : jobs[i].activations->fibers)
                bytes += simdetail::padded_fiber_bytes(f, hw.cache_line_bytes);
        fetch_bytes[i] = bytes;
    }
    auto fetch_cycles = [&](std::int64_t bytes) {
        return static_cast<std::int64_t>(
            std::ceil(static_cast<double>(bytes) / hw.hbm_bytes_per_cycle));
    };

    SimReport& total = result.report;
    total.snn_busy.assign(static_cast<std::size_t>(hw.snn_pes), 0);
    total.ann_busy.assign(static_cast<std::size_t>(hw.ann_pes), 0);
    total.total_cycles = hw.hbm_first_access_cycles + fetch_cycles(fetch_bytes[0]);
    total.fetch_exposed_cycles = total.total_cycles;
    total.hbm_bytes = fetch_bytes[0];

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        LayerResult layer = simulate_layer(jobs[i], hw, weights);
        const SimReport& r = layer.report;
        std::int64_t next_fetch =
            i + 1 < jobs.size() ? fetch_cycles(fetch_bytes[i + 1]) : 0;
        std::int64_t step = std::max(r.total_cycles, next_fetch);
        total.total_cycles += step;
        total.fetch_exposed_cycles += std::max<std::int64_t>(
            0, next_fetch - r.total_cycles);
        total.launch_cycles += r.launch_cycles;
        total.stall_cycles += r.stall_cycles;
        total.total_matches += r.total_matches;
        total.cache_accesses += r.cache_accesses;
        total.cache_capacity_miss_bytes += r.cache_capacity_miss_bytes;
        total.bank_conflicts += r.bank_conflicts;
        total.hbm_bytes += r.hbm_bytes + (i + 1 < jobs.size() ? fetch_bytes[i + 1] : 0);
        for (std::size_t p = 0; p < total.snn_busy.size(); ++p)
            total.snn_busy[p] += r.snn_busy[p];
        for (std::size_t p = 0; p < total.ann_busy.size(); ++p)
            total.ann_busy[p] += r.ann_busy[p];
        for (const auto& [key, value] : r.energy) total.energy[key] += value;
        result.outputs.push_back(std::move(layer.output));
        result.layer_reports.push_back(std::move(layer.report));
    }
    double hbm_e = weights.hbm_byte * static_cast<double>(total.hbm_bytes);
    total.energy["hbm.bytes"] = hbm_e;
    return result;
}

struct CalibrationPoint {
    std::int64_t matches = 0;
    double ann_energy = 0.0, ann_cycles = 0.0;
    double snn_energy = 0.0, snn_cycles = 0.0;
};

// Geometry of the calibration microbenchmark column. The defaults replicate
// the abstract single-row fully-occupied bench; scheduling paths calibrate
// at each layer's geometry instead, so the fitted per-column constants carry
// that layer's real stream overheads (chunk bubbles, operand broadcast,
// epilogues) and the energy slope reflects its fetch-to-compute ratio.
struct BenchGeometry {
    std::int64_t rows = 1;
    std::int64_t depth = 1024;
    double act_density = 1.0;

    static constexpr std::int64_t kGridTop = 1024;

    void validate() const {
        if (rows <= 0 || depth <= 0)
            throw DomainError("bench geometry: non-positive shape");
        if (!(act_density > 0.0) || act_density > 1.0)
            throw DomainError("bench geometry: density outside (0, 1]");
    }

    std::int64_t act_cells() const {
        return std::llround(act_density * static_cast<double>(rows) *
                            static_cast<double>(depth));
    }

    // Positions whose activation columns seat the match grid exactly: each
    // grid increment is split into columns holding at most one cell per row.
    std::int64_t special_positions() const {
        static constexpr std::int64_t incs[] = {16, 48, 192, 768};
        std::int64_t count = 0;
        for (std::int64_t inc : incs) count += (inc + rows - 1) / rows;
        return count;
    }

    // Off-support positions reserved for the weight nonzeros that keep the
    // weight density on the deployment relation m = rows·depth·da·dw.
    std::int64_t extras_zone() const {
        static constexpr std::int64_t grid[] = {16, 64, 256, 1024};
        std::int64_t zone = 0, specials = 0, cum = 0;
        for (std::int64_t g : grid) {
            std::int64_t inc = g - cum;
            specials += (inc + rows - 1) / rows;
            cum = g;
            std::int64_t nw = std::llround(
                static_cast<double>(g) /
                (act_density * static_cast<double>(rows)));
            zone = std::max(zone, nw - specials);
        }
        return zone;
    }

    // The bench must seat the whole grid: enough activation cells to
    // intersect, positions for the matched columns and the off-support
    // zone, and room to spread the remaining activation cells.
    bool can_realize_grid() const {
        std::int64_t na = act_cells();
        if (na < kGridTop) return false;
        std::int64_t used = special_positions() + extras_zone();
        if (used > depth) return false;
        std::int64_t filler_pos = depth - used;
        std::int64_t filler_cells = na - kGridTop;
        return filler_cells <= filler_pos * rows;
    }
};

// Layer-derived geometry for the scheduling path; layers too small to seat
// the grid fall back to the abstract default bench.
inline BenchGeometry bench_geometry_for_layer(std::int64_t rows,
                                              std::int64_t depth,
                                              double act_density) {
    BenchGeometry g;
    g.rows = rows;
    g.depth = depth;
    g.act_density = std::clamp(act_density, 1e-6, 1.0);
    if (rows <= 0 || depth <= 0 || !g.can_realize_grid())
        return BenchGeometry{};
    return g;
}

struct CalibrationResult {
    CostParams params;
    BenchGeometry geometry;
    std::vector<CalibrationPoint> points;
    double max_energy_residual = 0.0;
    double max_latency_residual = 0.0;
};

namespace simdetail {

struct LineFit {
    double slope = 0.0, intercept = 0.0, max_residual = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x,
                             const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = n * sxx - sx * sx;
    if (det == 0.0)
        throw CalibrationError("calibration: singular fit (identical points)");
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy * sxx - sx * sxy) / det;
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.max_residual =
            std::max(fit.max_residual,
                     std::abs(fit.slope * x[i] + fit.intercept - y[i]));
    return fit;
}

}  // namespace simdetail

// Single-column microbenchmarks over a match-count grid at a configurable
// bench geometry. The activation operand is fixed across grid points (its
// fetch is a per-column constant, as in deployment) and the weight column
// alone moves the match count, with off-support nonzeros keeping its density
// on the deployment relation. Matched values cycle through the levels so
// spike energy stays representative. The reduction stream's shape is fixed,
// so the affine latency model is exact by construction; energy lines carry
// the residual report.
inline CalibrationResult calibrate_cost_params(const HardwareConfig& hw,
                                               const EnergyWeights& weights,
                                               const QuantConfig& cfg,
                                               const BenchGeometry& geom = {}) {
    hw.validate();
    weights.validate();
    geom.validate();
    if (!geom.can_realize_grid())
        throw CalibrationError(
            "calibration: bench geometry cannot realize the match grid");
    const std::vector<std::int64_t> grid = {0, 16, 64, 256, 1024};
    const std::size_t rows = static_cast<std::size_t>(geom.rows);
    const std::size_t depth = static_cast<std::size_t>(geom.depth);
    CalibrationResult result;
    result.geometry = geom;

    // Matched ("special") positions: nested prefixes of this list realize
    // every grid point exactly. Position i holds special_count[i] activation
    // cells spread evenly down the rows.
    std::vector<std::int64_t> special_count;
    std::vector<std::size_t> grid_specials;  // prefix length per grid point
    for (std::int64_t g : grid) {
        std::int64_t inc = g - (grid_specials.empty()
                                    ? 0
                                    : grid[grid_specials.size() - 1]);
        while (inc > 0) {
            std::int64_t v = std::min<std::int64_t>(geom.rows, inc);
            special_count.push_back(v);
            inc -= v;
        }
        grid_specials.push_back(special_count.size());
    }
    const std::size_t n_special = special_count.size();
    const std::size_t zone = static_cast<std::size_t>(geom.extras_zone());

    // Fixed activation operand: grid cells on the special positions, the
    // rest spread evenly over the remaining positions.
    std::vector<std::int8_t> dense_a(rows * depth, 0);
    std::int64_t ordinal = 0;
    auto act_value = [&]() {
        return static_cast<std::int8_t>(1 + (ordinal++ % cfg.levels));
    };
    for (std::size_t p = 0; p < n_special; ++p) {
        std::int64_t v = special_count[p];
        for (std::int64_t j = 0; j < v; ++j) {
            std::size_t row = static_cast<std::size_t>(j * geom.rows / v);
            dense_a[row * depth + p] = act_value();
        }
    }
    const std::size_t filler_base = n_special + zone;
    const std::size_t filler_positions = depth - filler_base;
    std::int64_t filler_cells = geom.act_cells() - BenchGeometry::kGridTop;
    for (std::int64_t t = 0; t < filler_cells; ++t) {
        std::size_t slot = static_cast<std::size_t>(t) % filler_positions;
        std::size_t pass = static_cast<std::size_t>(t) / filler_positions;
        std::size_t row = (pass + slot) % rows;
        dense_a[row * depth + filler_base + slot] = act_value();
    }
    BitmapMatrix a = BitmapMatrix::from_dense(
        static_cast<std::int64_t>(rows), static_cast<std::int64_t>(depth),
        Layout::RowMajor, dense_a);

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        std::int64_t r = grid[gi];
        std::vector<std::int8_t> dense_w(depth, 0);
        for (std::size_t p = 0; p < grid_specials[gi]; ++p) dense_w[p] = 1;
        std::int64_t nw = std::llround(
            static_cast<double>(r) /
            (geom.act_density * static_cast<double>(geom.rows)));
        std::int64_t extras =
            nw - static_cast<std::int64_t>(grid_specials[gi]);
        for (std::int64_t j = 0; j < extras; ++j)
            dense_w[n_special + static_cast<std::size_t>(j)] = 1;
        BitmapMatrix b = BitmapMatrix::from_dense(
            static_cast<std::int64_t>(depth), 1, Layout::ColMajor, dense_w);

        HardwareConfig bench_hw = hw;
        bench_hw.snn_pes = 1;
        bench_hw.ann_pes = 1;

        CalibrationPoint point;
        point.matches = r;
        for (bool snn : {false, true}) {
            Assignment assign;
            assign.to_snn.assign(1, snn ? 1 : 0);
            assign.snn_packing.pe_columns.assign(1, {});
            assign.ann_packing.pe_columns.assign(1, {});
            (snn ? assign.snn_packing : assign.ann_packing).pe_columns[0] = {0};
            assign.packed = true;
            LayerJob job{&a, &b, cfg, &assign};
            LayerResult lr = simulate_layer(job, bench_hw, weights);
            if (lr.report.total_matches != r)
                throw CalibrationError(
                    "calibration: bench realized a wrong match count");
            double busy = static_cast<double>(
                snn ? lr.report.snn_busy[0] : lr.report.ann_busy[0]);
            double energy = lr.report.total_energy() -
                            lr.report.energy.at("hbm.bytes");
            if (snn) {
                point.snn_cycles = busy;
                point.snn_energy = energy;
            } else {
                point.ann_cycles = busy;
                point.ann_energy = energy;
            }
        }
        result.points.push_back(point);
    }

    std::vector<double> x, ea, la, es, ls;
    for (const auto& p : result.points) {
        x.push_back(static_cast<double>(p.matches));
        ea.push_back(p.ann_energy);
        la.push_back(p.ann_cycles);
        es.push_back(p.snn_energy);
        ls.push_back(p.snn_cycles);
    }
    simdetail::LineFit fit_ea = simdetail::least_squares(x, ea);
    simdetail::LineFit fit_la = simdetail::least_squares(x, la);
    simdetail::LineFit fit_es = simdetail::least_squares(x, es);
    simdetail::LineFit fit_ls = simdetail::least_squares(x, ls);

    CostParams params;
    params.ann.energy_per_match = fit_ea.slope;
    params.ann.energy_per_column = fit_ea.intercept;
    params.ann.time_per_match = fit_la.slope;
    params.ann.time_per_column = fit_la.intercept;
    params.ann.launch_time = hw.launch_cycles;
    params.ann.pes = hw.ann_pes;
    params.snn.energy_per_match = fit_es.slope;
    params.snn.energy_per_column = fit_es.intercept;
    params.snn.time_per_match = fit_ls.slope;
    params.snn.time_per_column = fit_ls.intercept;
    params.snn.launch_time = hw.launch_cycles;
    params.snn.pes = hw.snn_pes;
    params.lambda_weight = 1.0;

    result.max_energy_residual =
        std::max(fit_ea.max_residual, fit_es.max_residual);
    result.max_latency_residual =
        std::max(fit_la.max_residual, fit_ls.max_residual);
    result.params = params;
    return result;
}

}  // namespace neuroflex
