#pragma once

// Analytic per-layer cost model: robust per-column match estimates, affine
// energy/latency per column, makespan-limited delay, EDP, and the convex
// surrogate the scheduler minimizes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "neuroflex/errors.hpp"

namespace neuroflex {

// Per-column match-count estimates. samples may be empty when stats were
// constructed directly from known match counts.
struct ColumnStats {
    std::vector<std::vector<std::int64_t>> samples;
    std::vector<double> r_hat;
    double q = 0.9;

    std::size_t columns() const { return r_hat.size(); }

    static ColumnStats from_matches(std::vector<double> matches, double q = 0.9) {
        ColumnStats s;
        s.q = q;
        for (double m : matches)
            if (m < 0) throw DomainError("column stats: negative match count");
        s.r_hat = std::move(matches);
        return s;
    }
};

// Lower order statistic at ceil(q*S), 1-based. The tiny slack keeps exact
// products like 0.9*10 from rounding up to the next index.
inline std::size_t quantile_index(double q, std::size_t n_samples) {
    std::size_t idx = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(n_samples) - 1e-9));
    if (idx < 1) idx = 1;
    if (idx > n_samples) idx = n_samples;
    return idx;
}

inline ColumnStats quantile_stats(
    const std::vector<std::vector<std::int64_t>>& samples, double q = 0.9) {
    if (q <= 0.0 || q >= 1.0)
        throw DomainError("quantile_stats: q must lie in (0,1)");
    ColumnStats stats;
    stats.q = q;
    stats.samples = samples;
    stats.r_hat.reserve(samples.size());
    for (const auto& column : samples) {
        if (column.empty())
            throw DomainError("quantile_stats: column has no samples");
        std::vector<std::int64_t> sorted = column;
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front() < 0)
            throw DomainError("quantile_stats: negative match count");
        stats.r_hat.push_back(
            static_cast<double>(sorted[quantile_index(q, sorted.size()) - 1]));
    }
    return stats;
}

struct CoreCost {
    double energy_per_match = 0.0;   // eps
    double energy_per_column = 0.0;  // zeta
    double time_per_match = 0.0;     // beta
    double time_per_column = 0.0;    // delta
    double launch_time = 0.0;        // alpha
    int pes = 0;

    void validate() const {
        if (energy_per_match < 0 || energy_per_column < 0 ||
            time_per_match < 0 || time_per_column < 0 || launch_time < 0)
            throw DomainError("core cost: negative coefficient");
        if (pes < 0) throw DomainError("core cost: negative PE count");
    }
};

struct CostParams {
    CoreCost snn;
    CoreCost ann;
    double lambda_weight = 1.0;

    void validate() const {
        snn.validate();
        ann.validate();
        if (!(lambda_weight > 0.0))
            throw DomainError("cost params: lambda must be positive");
    }
};

struct PerColumnCost {
    double energy = 0.0;
    double time = 0.0;
};

inline PerColumnCost per_column_cost(double r_hat, const CoreCost& core) {
    if (r_hat < 0) throw DomainError("per_column_cost: negative match estimate");
    return {core.energy_per_match * r_hat + core.energy_per_column,
            core.time_per_match * r_hat + core.time_per_column};
}

// Column-to-core routing plus, once packed, the per-PE dispatch lists.
struct CorePacking {
    std::vector<std::vector<std::uint32_t>> pe_columns;

    std::size_t column_count() const {
        std::size_t n = 0;
        for (const auto& pe : pe_columns) n += pe.size();
        return n;
    }
};

struct Assignment {
    std::vector<std::uint8_t> to_snn;
    CorePacking snn_packing;
    CorePacking ann_packing;
    bool packed = false;

    std::size_t columns() const { return to_snn.size(); }

    std::size_t snn_columns() const {
        std::size_t n = 0;
        for (std::uint8_t f : to_snn) n += f ? 1 : 0;
        return n;
    }
};

namespace detail {

inline void check_coverage(const Assignment& a, std::size_t n) {
    if (a.to_snn.size() != n)
        throw StructuralError("assignment does not cover all columns");
}

// The packing must route exactly the columns whose flag selects this core,
// each once.
inline void check_packing(const Assignment& a, const CorePacking& packing,
                          bool snn_side) {
    std::vector<std::uint8_t> seen(a.to_snn.size(), 0);
    for (const auto& pe : packing.pe_columns) {
        for (std::uint32_t col : pe) {
            if (col >= a.to_snn.size())
                throw StructuralError("packing references unknown column");
            if ((a.to_snn[col] != 0) != snn_side)
                throw StructuralError("packing routes a column to the wrong core");
            if (seen[col]++)
                throw StructuralError("packing repeats a column");
        }
    }
    for (std::size_t i = 0; i < a.to_snn.size(); ++i)
        if ((a.to_snn[i] != 0) == snn_side && !seen[i])
            throw StructuralError("packing misses a routed column");
}

}  // namespace detail

inline double layer_energy(const Assignment& assign, const ColumnStats& stats,
                           const CostParams& params) {
    detail::check_coverage(assign, stats.columns());
    double energy = 0.0;
    for (std::size_t i = 0; i < stats.columns(); ++i) {
        const CoreCost& core = assign.to_snn[i] ? params.snn : params.ann;
        energy += per_column_cost(stats.r_hat[i], core).energy;
    }
    return energy;
}

enum class CoreId : std::uint8_t { Snn = 0, Ann = 1 };

inline double core_makespan(const Assignment& assign, const ColumnStats& stats,
                            CoreId core_id, const CostParams& params) {
    detail::check_coverage(assign, stats.columns());
    if (!assign.packed)
        throw StructuralError("core_makespan: assignment is not packed");
    bool snn_side = core_id == CoreId::Snn;
    const CoreCost& core = snn_side ? params.snn : params.ann;
    const CorePacking& packing = snn_side ? assign.snn_packing : assign.ann_packing;
    detail::check_packing(assign, packing, snn_side);
    double max_load = 0.0;
    for (const auto& pe : packing.pe_columns) {
        double load = 0.0;
        for (std::uint32_t col : pe)
            load += per_column_cost(stats.r_hat[col], core).time;
        max_load = std::max(max_load, load);
    }
    return core.launch_time + max_load;
}

inline double layer_delay(const Assignment& assign, const ColumnStats& stats,
                          const CostParams& params) {
    return std::max(core_makespan(assign, stats, CoreId::Snn, params),
                    core_makespan(assign, stats, CoreId::Ann, params));
}

inline double edp(const Assignment& assign, const ColumnStats& stats,
                  const CostParams& params) {
    return layer_energy(assign, stats, params) *
           layer_delay(assign, stats, params);
}

inline double surrogate_phi(const Assignment& assign, const ColumnStats& stats,
                            const CostParams& params) {
    return layer_energy(assign, stats, params) +
           params.lambda_weight * layer_delay(assign, stats, params);
}

}  // namespace neuroflex
