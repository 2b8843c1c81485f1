// Cycle-level simulator: pipeline timing contracts, layer and network
// composition, memory-model stalls, energy meters and cost calibration.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "neuroflex/cyclesim.hpp"
#include "neuroflex/gemm.hpp"
#include "neuroflex/rng.hpp"
#include "neuroflex/schedule.hpp"

using namespace neuroflex;

namespace {

// Dense test operands with the raw arrays retained so every oracle below
// can recount matches without touching the bitmap machinery.
struct DenseJob {
    std::vector<std::int8_t> a;  // row major, M x K
    std::vector<std::int8_t> b;  // row major, K x N
    std::size_t m = 0, k = 0, n = 0;
    BitmapMatrix am;
    BitmapMatrix bm;

    std::int64_t matches(std::size_t row, std::size_t col) const {
        std::int64_t count = 0;
        for (std::size_t i = 0; i < k; ++i)
            if (a[row * k + i] != 0 && b[i * n + col] != 0) ++count;
        return count;
    }

    // Concatenated per-chunk match counts for one column stream, the same
    // order the PE consumes them: all chunks of row 0, then row 1, ...
    std::vector<std::int64_t> stream(std::size_t col) const {
        std::size_t chunks = (k + 127) / 128;
        std::vector<std::int64_t> out;
        for (std::size_t row = 0; row < m; ++row)
            for (std::size_t c = 0; c < chunks; ++c) {
                std::int64_t count = 0;
                std::size_t hi = std::min(k, (c + 1) * 128);
                for (std::size_t i = c * 128; i < hi; ++i)
                    if (a[row * k + i] != 0 && b[i * n + col] != 0) ++count;
                out.push_back(count);
            }
        return out;
    }
};

DenseJob random_job(std::uint64_t seed, std::size_t m, std::size_t k,
                    std::size_t n, double a_density, double b_density,
                    int levels) {
    Rng rng(seed);
    DenseJob job;
    job.m = m;
    job.k = k;
    job.n = n;
    job.a.assign(m * k, 0);
    job.b.assign(k * n, 0);
    for (auto& v : job.a)
        if (rng.next_bool(a_density))
            v = static_cast<std::int8_t>(rng.next_int(1, levels));
    for (auto& v : job.b)
        if (rng.next_bool(b_density)) {
            std::int64_t w = rng.next_int(-127, 126);
            if (w >= 0) ++w;
            v = static_cast<std::int8_t>(w);
        }
    job.am = BitmapMatrix::from_dense(static_cast<std::uint32_t>(m),
                                      static_cast<std::uint32_t>(k),
                                      Layout::RowMajor, job.a);
    job.bm = BitmapMatrix::from_dense(static_cast<std::uint32_t>(k),
                                      static_cast<std::uint32_t>(n),
                                      Layout::ColMajor, job.b);
    return job;
}

Assignment hand_schedule(std::vector<std::uint8_t> to_snn,
                         std::vector<std::vector<std::uint32_t>> snn_pes,
                         std::vector<std::vector<std::uint32_t>> ann_pes) {
    Assignment a;
    a.to_snn = std::move(to_snn);
    a.snn_packing.pe_columns = std::move(snn_pes);
    a.ann_packing.pe_columns = std::move(ann_pes);
    a.packed = true;
    return a;
}

HardwareConfig small_hw(int snn_pes, int ann_pes) {
    HardwareConfig hw;
    hw.snn_pes = snn_pes;
    hw.ann_pes = ann_pes;
    return hw;
}

// Fiber footprint in DRAM: 16 bitmap bytes per chunk plus packed values,
// padded to a full cache line. Recounted here so the network fetch oracle
// does not lean on the simulator's own helper.
std::int64_t padded_bytes(const BitmapMatrix& m, int line_bytes) {
    std::int64_t total = 0;
    for (const auto& f : m.fibers) {
        std::int64_t raw =
            static_cast<std::int64_t>(chunk_count(f.length())) * 16 +
            static_cast<std::int64_t>(f.nonzeros());
        total += (raw + line_bytes - 1) / line_bytes * line_bytes;
    }
    return total;
}

std::int64_t div_ceil_cycles(std::int64_t bytes, double bw) {
    return static_cast<std::int64_t>(
        std::ceil(static_cast<double>(bytes) / bw));
}

}  // namespace

TEST_CASE("ANN pipeline cycles match the event-trace examples") {
    // 1 chunk, 5 matches: warm-up 2 + 5 + 0 bubbles + 1 quantizer stage.
    CHECK(ann_pe_cycles({5}) == 8);
    // Overheads only.
    CHECK(ann_pe_cycles({0}) == 3);
    // 3 chunks x 4 matches: 2 + 12 + 2 bubbles + 1.
    CHECK(ann_pe_cycles({4, 4, 4}) == 17);
    // An empty stream never enters the pipeline.
    CHECK(ann_pe_cycles({}) == 0);
    // Per-chunk warm-up variant charges 2 cycles for every chunk.
    CHECK(ann_pe_cycles({4, 4, 4}, true) == 21);
}

TEST_CASE("SNN pipeline cycles match the event-trace examples") {
    QuantConfig l8 = QuantConfig::make(8, 64);
    QuantConfig l2 = QuantConfig::make(2, 64);
    // 2 warm-up + 8 laggy fill + 5 + 0 bubbles + 7 count + 8 reset.
    CHECK(snn_pe_cycles({5}, l8) == 30);
    CHECK(snn_pe_cycles({0}, l8) == 25);
    // L=2: 2 + 8 + 5 + 0 + 1 + 2.
    CHECK(snn_pe_cycles({5}, l2) == 18);
    CHECK(snn_pe_cycles({}, l8) == 0);
    CHECK(snn_pe_cycles({4, 4, 4}, l8, true) == 43);
}

TEST_CASE("pipeline cycles are strictly monotone in matches and chunks") {
    QuantConfig cfg = QuantConfig::make(4, 64);
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t chunks = static_cast<std::size_t>(rng.next_int(1, 12));
        std::vector<std::int64_t> counts(chunks);
        for (auto& c : counts) c = rng.next_int(0, 40);

        std::int64_t base_ann = ann_pe_cycles(counts);
        std::int64_t base_snn = snn_pe_cycles(counts, cfg);

        // One extra match costs exactly one cycle.
        std::vector<std::int64_t> bumped = counts;
        bumped[static_cast<std::size_t>(rng.next_below(chunks))] += 1;
        CHECK(ann_pe_cycles(bumped) == base_ann + 1);
        CHECK(snn_pe_cycles(bumped, cfg) == base_snn + 1);

        // One extra chunk costs its matches plus one bubble.
        std::int64_t extra = rng.next_int(0, 40);
        std::vector<std::int64_t> longer = counts;
        longer.push_back(extra);
        CHECK(ann_pe_cycles(longer) == base_ann + extra + 1);
        CHECK(snn_pe_cycles(longer, cfg) == base_snn + extra + 1);
    }
}

TEST_CASE("single-column layer is pipeline cycles plus launch overhead") {
    // One activation row, one weight column, everything resident: no stalls.
    DenseJob job = random_job(3, 1, 128, 1, 0.1, 0.3, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    HardwareConfig hw = small_hw(1, 1);

    std::vector<std::int64_t> counts = job.stream(0);

    SECTION("ANN side") {
        Assignment sched = hand_schedule({0}, {{}}, {{0}});
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        LayerResult r = simulate_layer(lj, hw, EnergyWeights::defaults());
        CHECK(r.report.stall_cycles == 0);
        CHECK(r.report.ann_busy[0] == ann_pe_cycles(counts));
        CHECK(r.report.total_cycles ==
              hw.launch_cycles + ann_pe_cycles(counts));
    }
    SECTION("SNN side") {
        Assignment sched = hand_schedule({1}, {{0}}, {{}});
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        LayerResult r = simulate_layer(lj, hw, EnergyWeights::defaults());
        CHECK(r.report.stall_cycles == 0);
        CHECK(r.report.snn_busy[0] == snn_pe_cycles(counts, cfg));
        CHECK(r.report.total_cycles ==
              hw.launch_cycles + snn_pe_cycles(counts, cfg));
    }
}

TEST_CASE("two identical columns on two PEs finish in one column's time") {
    std::vector<std::int8_t> a(128, 0), b2(128 * 2, 0), b1(128, 0);
    for (int i = 0; i < 12; ++i) a[static_cast<std::size_t>(i * 7)] = 3;
    for (int i = 0; i < 10; ++i) {
        b1[static_cast<std::size_t>(i * 11)] = 5;
        b2[static_cast<std::size_t>(i * 11) * 2] = 5;
        b2[static_cast<std::size_t>(i * 11) * 2 + 1] = 5;
    }
    BitmapMatrix am = BitmapMatrix::from_dense(1, 128, Layout::RowMajor, a);
    BitmapMatrix one = BitmapMatrix::from_dense(128, 1, Layout::ColMajor, b1);
    BitmapMatrix two = BitmapMatrix::from_dense(128, 2, Layout::ColMajor, b2);
    QuantConfig cfg = QuantConfig::make(8, 64);

    Assignment s1 = hand_schedule({0}, {{}}, {{0}});
    LayerJob j1{&am, &one, cfg, &s1};
    LayerResult r1 = simulate_layer(j1, small_hw(1, 1), EnergyWeights::defaults());

    Assignment s2 = hand_schedule({0, 0}, {{}}, {{0}, {1}});
    LayerJob j2{&am, &two, cfg, &s2};
    LayerResult r2 = simulate_layer(j2, small_hw(1, 2), EnergyWeights::defaults());

    CHECK(r1.report.total_cycles == r2.report.total_cycles);
    CHECK(r2.report.ann_busy[0] == r2.report.ann_busy[1]);
}

TEST_CASE("mixed sixteen-column job latency equals the max per-PE trace") {
    // Two activation rows, sixteen columns packed two per PE across four
    // SNN and four ANN PEs. Fibers are small enough that every fiber sits
    // in one distinct cache line, so no stall source fires and the layer
    // time is exactly launch plus the longest per-PE trace.
    DenseJob job = random_job(17, 2, 128, 16, 0.1, 0.1, 4);
    QuantConfig cfg = QuantConfig::make(4, 64);
    HardwareConfig hw = small_hw(4, 4);

    std::vector<std::uint8_t> to_snn(16, 0);
    for (std::size_t n = 0; n < 8; ++n) to_snn[n] = 1;
    std::vector<std::vector<std::uint32_t>> snn_pes(4), ann_pes(4);
    for (std::uint32_t n = 0; n < 8; ++n) snn_pes[n % 4].push_back(n);
    for (std::uint32_t n = 8; n < 16; ++n) ann_pes[n % 4].push_back(n);
    Assignment sched = hand_schedule(to_snn, snn_pes, ann_pes);

    LayerJob lj{&job.am, &job.bm, cfg, &sched};
    LayerResult r = simulate_layer(lj, hw, EnergyWeights::defaults());

    // Independent trace: per-column stream cycles from the dense arrays,
    // summed along each PE queue.
    std::int64_t max_busy = 0;
    std::int64_t total_matches = 0;
    for (std::size_t p = 0; p < 4; ++p) {
        std::int64_t snn_load = 0, ann_load = 0;
        for (std::uint32_t col : snn_pes[p])
            snn_load += snn_pe_cycles(job.stream(col), cfg);
        for (std::uint32_t col : ann_pes[p])
            ann_load += ann_pe_cycles(job.stream(col));
        CHECK(r.report.snn_busy[p] == snn_load);
        CHECK(r.report.ann_busy[p] == ann_load);
        max_busy = std::max({max_busy, snn_load, ann_load});
    }
    for (std::size_t n = 0; n < 16; ++n)
        for (std::size_t m = 0; m < 2; ++m) total_matches += job.matches(m, n);

    CHECK(r.report.stall_cycles == 0);
    CHECK(r.report.total_cycles == hw.launch_cycles + max_busy);
    CHECK(r.report.total_matches == total_matches);

    // Utilization recount from the raw busy histogram.
    std::int64_t busy_sum = 0;
    for (std::int64_t b : r.report.snn_busy) busy_sum += b;
    for (std::int64_t b : r.report.ann_busy) busy_sum += b;
    CHECK(utilization(r.report) ==
          Catch::Approx(static_cast<double>(busy_sum) /
                        (8.0 * static_cast<double>(r.report.total_cycles))));
}

TEST_CASE("busy cycles never exceed total and energy meters sum to total") {
    DenseJob job = random_job(23, 6, 300, 10, 0.3, 0.3, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    HardwareConfig hw = small_hw(2, 2);

    std::vector<std::uint8_t> to_snn = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    Assignment sched = hand_schedule(to_snn, {{0, 4}, {2, 6, 8}},
                                     {{1, 5}, {3, 7, 9}});
    LayerJob lj{&job.am, &job.bm, cfg, &sched};
    LayerResult r = simulate_layer(lj, hw, EnergyWeights::defaults());

    for (std::int64_t b : r.report.snn_busy) {
        CHECK(b >= 0);
        CHECK(b <= r.report.total_cycles);
    }
    for (std::int64_t b : r.report.ann_busy) {
        CHECK(b >= 0);
        CHECK(b <= r.report.total_cycles);
    }

    // Every documented meter is present; the report total is their sum.
    double manual = 0.0;
    for (const char* key :
         {"cache.access", "cache.crossbar", "hbm.bytes", "ann.prefix",
          "ann.compute", "ann.activation", "ann.control", "snn.prefix",
          "snn.compute", "snn.activation", "snn.control"}) {
        REQUIRE(r.report.energy.count(key) == 1);
        CHECK(r.report.energy.at(key) >= 0.0);
        manual += r.report.energy.at(key);
    }
    CHECK(r.report.energy.size() == 11);
    CHECK(r.report.total_energy() == Catch::Approx(manual));
    CHECK(r.report.edp() ==
          Catch::Approx(manual * static_cast<double>(r.report.total_cycles)));
}

TEST_CASE("simulator output is bit-identical to the exact evaluator") {
    QuantConfig cfg = QuantConfig::make(8, 64);
    for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
        DenseJob job = random_job(seed, 7, 300, 9, 0.35, 0.3, 8);
        Rng rng(seed + 100);
        std::vector<std::uint8_t> to_snn(9);
        std::vector<std::vector<std::uint32_t>> snn_pes(2), ann_pes(2);
        ModeMask mask;
        for (std::uint32_t n = 0; n < 9; ++n) {
            to_snn[n] = rng.next_bool(0.5) ? 1 : 0;
            mask.modes.push_back(to_snn[n] ? Mode::Snn : Mode::Ann);
            (to_snn[n] ? snn_pes : ann_pes)[n % 2].push_back(n);
        }
        Assignment sched = hand_schedule(to_snn, snn_pes, ann_pes);
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        LayerResult r = simulate_layer(lj, small_hw(2, 2),
                                       EnergyWeights::defaults());
        BitmapMatrix ref = hybrid_gemm(job.am, job.bm, mask, cfg);
        CHECK(r.output.to_dense() == ref.to_dense());
    }
}

TEST_CASE("identical inputs produce identical reports") {
    DenseJob job = random_job(31, 5, 260, 8, 0.3, 0.25, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    Assignment sched = hand_schedule({1, 1, 1, 1, 0, 0, 0, 0},
                                     {{0, 2}, {1, 3}}, {{4, 6}, {5, 7}});
    LayerJob lj{&job.am, &job.bm, cfg, &sched};
    LayerResult r1 = simulate_layer(lj, small_hw(2, 2), EnergyWeights::defaults());
    LayerResult r2 = simulate_layer(lj, small_hw(2, 2), EnergyWeights::defaults());

    CHECK(r1.report.total_cycles == r2.report.total_cycles);
    CHECK(r1.report.stall_cycles == r2.report.stall_cycles);
    CHECK(r1.report.bank_conflicts == r2.report.bank_conflicts);
    CHECK(r1.report.cache_accesses == r2.report.cache_accesses);
    CHECK(r1.report.cache_capacity_miss_bytes ==
          r2.report.cache_capacity_miss_bytes);
    CHECK(r1.report.hbm_bytes == r2.report.hbm_bytes);
    CHECK(r1.report.snn_busy == r2.report.snn_busy);
    CHECK(r1.report.ann_busy == r2.report.ann_busy);
    REQUIRE(r1.report.energy.size() == r2.report.energy.size());
    for (const auto& [key, value] : r1.report.energy)
        CHECK(value == r2.report.energy.at(key));
    CHECK(r1.output.to_dense() == r2.output.to_dense());
}

TEST_CASE("more PEs never slow a conflict-free layer under LPT packing") {
    DenseJob job = random_job(41, 1, 128, 16, 0.12, 0.1, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);

    std::vector<std::uint32_t> cols(16);
    std::vector<double> cycles(16);
    for (std::uint32_t n = 0; n < 16; ++n) {
        cols[n] = n;
        cycles[n] = static_cast<double>(ann_pe_cycles(job.stream(n)));
    }

    std::int64_t prev = -1;
    for (int pes = 1; pes <= 6; ++pes) {
        Assignment sched;
        sched.to_snn.assign(16, 0);
        sched.snn_packing.pe_columns.resize(1);
        sched.ann_packing = lpt_pack(cols, cycles, pes);
        sched.packed = true;
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        LayerResult r = simulate_layer(lj, small_hw(1, pes),
                                       EnergyWeights::defaults());
        CHECK(r.report.stall_cycles == 0);
        if (prev >= 0) CHECK(r.report.total_cycles <= prev);
        prev = r.report.total_cycles;
    }
}

TEST_CASE("energy meters route prefix, compute and activation work") {
    // M=3 rows, one chunk, one SNN and one ANN column: chunk steps = 3.
    std::vector<std::int8_t> a(3 * 128, 0), b(128 * 2, 0);
    a[0] = 2;
    a[128 + 7] = 1;
    a[2 * 128 + 9] = 3;
    b[0 * 2 + 0] = 4;   // matches row 0 (level 2)
    b[7 * 2 + 0] = -3;  // matches row 1 (level 1)
    b[9 * 2 + 1] = 6;   // matches row 2 (level 3)
    BitmapMatrix am = BitmapMatrix::from_dense(3, 128, Layout::RowMajor, a);
    BitmapMatrix bm = BitmapMatrix::from_dense(128, 2, Layout::ColMajor, b);
    QuantConfig cfg = QuantConfig::make(4, 64);
    Assignment sched = hand_schedule({1, 0}, {{0}}, {{1}});
    LayerJob lj{&am, &bm, cfg, &sched};

    EnergyWeights w;  // all lanes silent except the pair under test
    SECTION("prefix units: ANN charges two fast, SNN fast plus laggy") {
        w.fast_prefix = 1.0;
        w.laggy_prefix = 3.0;
        LayerResult r = simulate_layer(lj, small_hw(1, 1), w);
        CHECK(r.report.energy.at("snn.prefix") == Catch::Approx(4.0 * 3.0));
        CHECK(r.report.energy.at("ann.prefix") == Catch::Approx(2.0 * 3.0));
    }
    SECTION("compute: MACs per match, gated adds per spike event") {
        w.mac = 1.0;
        w.gated_accumulate = 0.5;
        LayerResult r = simulate_layer(lj, small_hw(1, 1), w);
        // SNN column 0 matches rows 0 and 1 with levels 2 and 1.
        CHECK(r.report.energy.at("snn.compute") == Catch::Approx(0.5 * 3.0));
        // ANN column 1 matches row 2 only.
        CHECK(r.report.energy.at("ann.compute") == Catch::Approx(1.0));
    }
    SECTION("activation: quantizer per output, spikes and resets per SNN") {
        w.qcfs_eval = 2.0;
        w.spike_gen = 7.0;
        w.soft_reset_step = 0.5;
        LayerResult r = simulate_layer(lj, small_hw(1, 1), w);
        CHECK(r.report.energy.at("ann.activation") == Catch::Approx(2.0 * 3.0));
        // 2 matched activations encoded, 4 reset steps x 3 outputs.
        CHECK(r.report.energy.at("snn.activation") ==
              Catch::Approx(7.0 * 2.0 + 0.5 * 4.0 * 3.0));
    }
    SECTION("comparison units track their reference costs") {
        w.qcfs_eval = 2.0;
        w.soft_reset_step = 1.0;
        CHECK(w.relu_eval() == Catch::Approx(1.6));
        CHECK(w.lif_step() == Catch::Approx(0.4));
    }
}

TEST_CASE("power breakdown isolates idle cores and sums to one hundred") {
    DenseJob job = random_job(53, 4, 256, 8, 0.3, 0.3, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);

    SECTION("all-ANN schedule leaves the SNN share at zero") {
        Assignment sched = hand_schedule({0, 0, 0, 0, 0, 0, 0, 0}, {{}, {}},
                                         {{0, 2, 4, 6}, {1, 3, 5, 7}});
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        LayerResult r = simulate_layer(lj, small_hw(2, 2),
                                       EnergyWeights::defaults());
        PowerBreakdown pb = power_breakdown(r.report);
        CHECK(pb.snn_share == 0.0);
        CHECK(pb.groups.at("snn") == 0.0);
        CHECK(pb.cache_share + pb.ann_share + pb.snn_share == 100.0);
    }
    SECTION("mixed schedule: positive shares, exact normalization") {
        Assignment sched = hand_schedule({1, 1, 1, 1, 0, 0, 0, 0},
                                         {{0, 2}, {1, 3}}, {{4, 6}, {5, 7}});
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        LayerResult r = simulate_layer(lj, small_hw(2, 2),
                                       EnergyWeights::defaults());
        PowerBreakdown pb = power_breakdown(r.report);
        CHECK(pb.cache_share > 0.0);
        CHECK(pb.ann_share > 0.0);
        CHECK(pb.snn_share > 0.0);
        CHECK(pb.cache_share + pb.ann_share + pb.snn_share == 100.0);
        // The share base is on-chip energy only; DRAM meters stay outside.
        double on_chip = pb.groups.at("cache") + pb.groups.at("ann") +
                         pb.groups.at("snn");
        CHECK(on_chip <= r.report.total_energy());
    }
}

TEST_CASE("an undersized cache exposes capacity refetch stalls") {
    DenseJob job = random_job(61, 4, 256, 64, 0.5, 0.25, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    std::vector<std::uint8_t> to_snn(64, 0);
    std::vector<std::vector<std::uint32_t>> ann_pes(4);
    for (std::uint32_t n = 0; n < 64; ++n) ann_pes[n % 4].push_back(n);
    Assignment sched = hand_schedule(to_snn, {{}}, ann_pes);
    LayerJob lj{&job.am, &job.bm, cfg, &sched};

    HardwareConfig big = small_hw(1, 4);
    HardwareConfig tiny = big;
    tiny.cache_bytes = 1024;  // 32 lines against a working set of hundreds

    LayerResult rb = simulate_layer(lj, big, EnergyWeights::defaults());
    LayerResult rt = simulate_layer(lj, tiny, EnergyWeights::defaults());

    CHECK(rb.report.cache_capacity_miss_bytes == 0);
    CHECK(rt.report.cache_capacity_miss_bytes > 0);
    CHECK(rt.report.cache_capacity_miss_bytes % tiny.cache_line_bytes == 0);
    CHECK(rt.report.hbm_bytes == rt.report.cache_capacity_miss_bytes);
    // Refetch serializes at DRAM bandwidth on top of bank conflicts.
    std::int64_t refetch = div_ceil_cycles(rt.report.cache_capacity_miss_bytes,
                                           tiny.hbm_bytes_per_cycle);
    CHECK(rt.report.stall_cycles == rt.report.bank_conflicts + refetch);
    CHECK(rt.report.total_cycles >= rb.report.total_cycles);
    // The busy traces are identical; only stalls differ.
    CHECK(rt.report.ann_busy == rb.report.ann_busy);
}

TEST_CASE("a single-bank cache serializes simultaneous chunk fetches") {
    std::vector<std::int8_t> a(128, 0), b(128 * 2, 0);
    for (int i = 0; i < 4; ++i) {
        a[static_cast<std::size_t>(i * 3)] = 1;
        b[static_cast<std::size_t>(i * 5) * 2] = 2;
        b[static_cast<std::size_t>(i * 7) * 2 + 1] = 3;
    }
    BitmapMatrix am = BitmapMatrix::from_dense(1, 128, Layout::RowMajor, a);
    BitmapMatrix bm = BitmapMatrix::from_dense(128, 2, Layout::ColMajor, b);
    QuantConfig cfg = QuantConfig::make(8, 64);
    Assignment sched = hand_schedule({0, 0}, {{}}, {{0}, {1}});
    LayerJob lj{&am, &bm, cfg, &sched};

    HardwareConfig spread = small_hw(1, 2);
    HardwareConfig serial = spread;
    serial.cache_banks = 1;

    LayerResult rs = simulate_layer(lj, spread, EnergyWeights::defaults());
    LayerResult r1 = simulate_layer(lj, serial, EnergyWeights::defaults());

    CHECK(rs.report.bank_conflicts == 0);
    // One chunk step, three simultaneous line reads (two columns plus the
    // activation broadcast) through one bank: two extra serialization slots.
    CHECK(r1.report.bank_conflicts == 2);
    CHECK(r1.report.stall_cycles == 2);
    CHECK(r1.report.total_cycles == rs.report.total_cycles + 2);
}

TEST_CASE("calibration recovers the affine latency model exactly") {
    HardwareConfig hw;
    EnergyWeights w = EnergyWeights::defaults();

    SECTION("L=8 intercept gap is the spiking overhead") {
        CalibrationResult cal =
            calibrate_cost_params(hw, w, QuantConfig::make(8, 64));
        // Latency lines are affine by construction: slope 1 cycle/match,
        // ANN intercept 2 + 7 bubbles + 1, SNN adds 8 + (L-1) + L.
        CHECK(cal.params.ann.time_per_match == 1.0);
        CHECK(cal.params.snn.time_per_match == 1.0);
        CHECK(cal.params.ann.time_per_column == 10.0);
        CHECK(cal.params.snn.time_per_column == 32.0);
        CHECK(cal.params.snn.time_per_column -
                  cal.params.ann.time_per_column ==
              22.0);
        CHECK(cal.max_latency_residual == 0.0);
        CHECK(cal.params.ann.launch_time == static_cast<double>(hw.launch_cycles));
        CHECK(cal.params.snn.launch_time == static_cast<double>(hw.launch_cycles));
        CHECK(cal.params.ann.pes == hw.ann_pes);
        CHECK(cal.params.snn.pes == hw.snn_pes);
        CHECK(cal.points.size() == 5);
        // Energy is near-affine: only cache-line rounding at r=16 deviates.
        CHECK(cal.max_energy_residual < 10.0);
        cal.params.validate();
    }
    SECTION("L=2 shrinks the spiking epilogue") {
        CalibrationResult cal =
            calibrate_cost_params(hw, w, QuantConfig::make(2, 64));
        CHECK(cal.params.snn.time_per_column -
                  cal.params.ann.time_per_column ==
              10.0);
    }
    SECTION("cheaper gated accumulate makes SNN energy slope smaller") {
        EnergyWeights micro;
        micro.mac = 1.0;
        micro.gated_accumulate = 0.1;
        CalibrationResult cal =
            calibrate_cost_params(hw, micro, QuantConfig::make(8, 64));
        CHECK(cal.params.snn.energy_per_match <
              cal.params.ann.energy_per_match);
    }
    SECTION("identical sample points cannot be fitted") {
        CHECK_THROWS_AS(
            simdetail::least_squares({3.0, 3.0, 3.0}, {1.0, 2.0, 3.0}),
            CalibrationError);
    }
}

TEST_CASE("network: a single layer adds only the initial operand fill") {
    DenseJob job = random_job(71, 4, 256, 8, 0.3, 0.3, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    Assignment sched = hand_schedule({1, 1, 1, 1, 0, 0, 0, 0},
                                     {{0, 2}, {1, 3}}, {{4, 6}, {5, 7}});
    LayerJob lj{&job.am, &job.bm, cfg, &sched};
    HardwareConfig hw = small_hw(2, 2);
    EnergyWeights w = EnergyWeights::defaults();

    LayerResult solo = simulate_layer(lj, hw, w);
    NetworkResult net = simulate_network({lj}, hw, w);

    std::int64_t fill_bytes = padded_bytes(job.am, hw.cache_line_bytes) +
                              padded_bytes(job.bm, hw.cache_line_bytes);
    std::int64_t fill = hw.hbm_first_access_cycles +
                        div_ceil_cycles(fill_bytes, hw.hbm_bytes_per_cycle);

    REQUIRE(net.layer_reports.size() == 1);
    CHECK(net.layer_reports[0].total_cycles == solo.report.total_cycles);
    CHECK(net.report.total_cycles == fill + solo.report.total_cycles);
    CHECK(net.report.fetch_exposed_cycles == fill);
    CHECK(net.report.hbm_bytes ==
          fill_bytes + solo.report.cache_capacity_miss_bytes);
    CHECK(net.outputs.size() == 1);
    CHECK(net.outputs[0].to_dense() == solo.output.to_dense());
}

TEST_CASE("network: next-layer weight fetch hides under heavy compute") {
    // Layer 0 is compute-heavy; layer 1's weights are one small matrix that
    // streams in well before layer 0 finishes.
    DenseJob heavy = random_job(73, 64, 256, 8, 0.5, 0.5, 8);
    DenseJob light = random_job(74, 1, 128, 2, 0.1, 0.1, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    Assignment s0 = hand_schedule({1, 1, 1, 1, 0, 0, 0, 0}, {{0, 2}, {1, 3}},
                                  {{4, 6}, {5, 7}});
    Assignment s1 = hand_schedule({0, 0}, {{}, {}}, {{0}, {1}});
    LayerJob j0{&heavy.am, &heavy.bm, cfg, &s0};
    LayerJob j1{&light.am, &light.bm, cfg, &s1};
    HardwareConfig hw = small_hw(2, 2);
    EnergyWeights w = EnergyWeights::defaults();

    LayerResult r0 = simulate_layer(j0, hw, w);
    LayerResult r1 = simulate_layer(j1, hw, w);
    std::int64_t f1_bytes = padded_bytes(light.bm, hw.cache_line_bytes);
    REQUIRE(div_ceil_cycles(f1_bytes, hw.hbm_bytes_per_cycle) <
            r0.report.total_cycles);

    NetworkResult net = simulate_network({j0, j1}, hw, w);
    std::int64_t fill_bytes = padded_bytes(heavy.am, hw.cache_line_bytes) +
                              padded_bytes(heavy.bm, hw.cache_line_bytes);
    std::int64_t fill = hw.hbm_first_access_cycles +
                        div_ceil_cycles(fill_bytes, hw.hbm_bytes_per_cycle);
    CHECK(net.report.total_cycles ==
          fill + r0.report.total_cycles + r1.report.total_cycles);
    CHECK(net.report.fetch_exposed_cycles == fill);
    CHECK(net.report.total_matches ==
          r0.report.total_matches + r1.report.total_matches);
}

TEST_CASE("network: fetch-bound layers run at the bandwidth limit") {
    // Throttled DRAM: weight streaming dominates every layer's compute.
    QuantConfig cfg = QuantConfig::make(8, 64);
    std::vector<DenseJob> jobs;
    for (std::uint64_t s : {81ull, 82ull, 83ull})
        jobs.push_back(random_job(s, 1, 128, 2, 0.05, 0.05, 8));
    Assignment sched = hand_schedule({0, 0}, {{}}, {{0}, {1}});
    std::vector<LayerJob> layer_jobs;
    for (const auto& j : jobs)
        layer_jobs.push_back(LayerJob{&j.am, &j.bm, cfg, &sched});
    HardwareConfig hw = small_hw(1, 2);
    hw.hbm_bytes_per_cycle = 2.0;
    EnergyWeights w = EnergyWeights::defaults();

    std::vector<std::int64_t> compute, fetch;
    std::int64_t fetch_bytes_total = 0;
    for (std::size_t i = 0; i < layer_jobs.size(); ++i) {
        compute.push_back(
            simulate_layer(layer_jobs[i], hw, w).report.total_cycles);
        std::int64_t bytes = padded_bytes(jobs[i].bm, hw.cache_line_bytes);
        if (i == 0) bytes += padded_bytes(jobs[i].am, hw.cache_line_bytes);
        fetch.push_back(div_ceil_cycles(bytes, hw.hbm_bytes_per_cycle));
        fetch_bytes_total += bytes;
    }
    for (std::size_t i = 1; i < fetch.size(); ++i)
        REQUIRE(fetch[i] > compute[i - 1]);

    NetworkResult net = simulate_network(layer_jobs, hw, w);

    // Double-buffer composition: fill, then each step is the larger of
    // this layer's compute and the next fetch.
    std::int64_t expect = hw.hbm_first_access_cycles + fetch[0];
    std::int64_t exposed = expect;
    for (std::size_t i = 0; i < compute.size(); ++i) {
        std::int64_t next = i + 1 < fetch.size() ? fetch[i + 1] : 0;
        expect += std::max(compute[i], next);
        exposed += std::max<std::int64_t>(0, next - compute[i]);
    }
    CHECK(net.report.total_cycles == expect);
    CHECK(net.report.fetch_exposed_cycles == exposed);

    // Bandwidth bound: the run can never beat total bytes over the pipe.
    CHECK(net.report.total_cycles >=
          hw.hbm_first_access_cycles +
              div_ceil_cycles(fetch_bytes_total, hw.hbm_bytes_per_cycle));
    CHECK(net.report.hbm_bytes == fetch_bytes_total);
}

TEST_CASE("simulator rejects malformed jobs and configurations") {
    DenseJob job = random_job(91, 2, 128, 2, 0.2, 0.2, 8);
    QuantConfig cfg = QuantConfig::make(8, 64);
    Assignment sched = hand_schedule({0, 0}, {{}}, {{0}, {1}});
    HardwareConfig hw = small_hw(1, 2);
    EnergyWeights w = EnergyWeights::defaults();

    SECTION("missing pieces") {
        LayerJob missing{nullptr, &job.bm, cfg, &sched};
        CHECK_THROWS_AS(simulate_layer(missing, hw, w), StructuralError);
        LayerJob no_sched{&job.am, &job.bm, cfg, nullptr};
        CHECK_THROWS_AS(simulate_layer(no_sched, hw, w), StructuralError);
    }
    SECTION("wrong layouts") {
        LayerJob swapped{&job.bm, &job.am, cfg, &sched};
        CHECK_THROWS_AS(simulate_layer(swapped, hw, w), StructuralError);
    }
    SECTION("inner dimensions differ") {
        DenseJob other = random_job(92, 2, 256, 2, 0.2, 0.2, 8);
        LayerJob bad{&job.am, &other.bm, cfg, &sched};
        CHECK_THROWS_AS(simulate_layer(bad, hw, w), StructuralError);
    }
    SECTION("schedule does not match the hardware shape") {
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        CHECK_THROWS_AS(simulate_layer(lj, small_hw(2, 2), w),
                        StructuralError);
    }
    SECTION("unpacked schedule") {
        Assignment loose = sched;
        loose.packed = false;
        LayerJob lj{&job.am, &job.bm, cfg, &loose};
        CHECK_THROWS_AS(simulate_layer(lj, hw, w), StructuralError);
    }
    SECTION("hardware and weight validation") {
        LayerJob lj{&job.am, &job.bm, cfg, &sched};
        HardwareConfig wide = hw;
        wide.chunk_bits = 64;
        CHECK_THROWS_AS(simulate_layer(lj, wide, w), DomainError);
        HardwareConfig empty = hw;
        empty.snn_pes = 0;
        empty.ann_pes = 0;
        CHECK_THROWS_AS(simulate_layer(lj, empty, w), DomainError);
        EnergyWeights bad = w;
        bad.mac = -1.0;
        CHECK_THROWS_AS(simulate_layer(lj, hw, bad), DomainError);
    }
    SECTION("empty network") {
        CHECK_THROWS_AS(
            simulate_network(std::vector<LayerJob>{}, hw, w), DomainError);
    }
}
