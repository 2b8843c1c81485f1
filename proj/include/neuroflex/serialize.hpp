#pragma once

// JSON and CSV serialization: configs, schedules with provenance hashes,
// simulation reports. JSON keys are emitted sorted, so identical inputs
// always produce byte-identical files.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroflex/cost.hpp"
#include "neuroflex/cyclesim.hpp"
#include "neuroflex/errors.hpp"
#include "neuroflex/hash.hpp"
#include "neuroflex/schedule.hpp"
#include "neuroflex/workload.hpp"

namespace neuroflex {

using Json = nlohmann::json;

// --- base64 -----------------------------------------------------------

namespace b64detail {
inline constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        std::uint32_t v = (static_cast<std::uint32_t>(bytes[i]) << 16) |
                          (static_cast<std::uint32_t>(bytes[i + 1]) << 8) |
                          bytes[i + 2];
        out.push_back(b64detail::kAlphabet[(v >> 18) & 63]);
        out.push_back(b64detail::kAlphabet[(v >> 12) & 63]);
        out.push_back(b64detail::kAlphabet[(v >> 6) & 63]);
        out.push_back(b64detail::kAlphabet[v & 63]);
    }
    std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        std::uint32_t v = static_cast<std::uint32_t>(bytes[i]) << 16;
        out.push_back(b64detail::kAlphabet[(v >> 18) & 63]);
        out.push_back(b64detail::kAlphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        std::uint32_t v = (static_cast<std::uint32_t>(bytes[i]) << 16) |
                          (static_cast<std::uint32_t>(bytes[i + 1]) << 8);
        out.push_back(b64detail::kAlphabet[(v >> 18) & 63]);
        out.push_back(b64detail::kAlphabet[(v >> 12) & 63]);
        out.push_back(b64detail::kAlphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0)
        throw StructuralError("base64: length is not a multiple of four");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t v = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2)
                    throw StructuralError("base64: misplaced padding");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) throw StructuralError("base64: data after padding");
            int d = value_of(c);
            if (d < 0) throw StructuralError("base64: invalid character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

// --- mask packing (bit 0 = column 0, little-endian within each byte) ----

inline std::vector<std::uint8_t> pack_mask(const std::vector<std::uint8_t>& to_snn) {
    std::vector<std::uint8_t> bytes((to_snn.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < to_snn.size(); ++i)
        if (to_snn[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return bytes;
}

inline std::vector<std::uint8_t> unpack_mask(const std::vector<std::uint8_t>& bytes,
                                             std::size_t columns) {
    if (bytes.size() != (columns + 7) / 8)
        throw StructuralError("schedule mask: byte length does not match columns");
    std::vector<std::uint8_t> to_snn(columns, 0);
    for (std::size_t i = 0; i < columns; ++i)
        to_snn[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    for (std::size_t i = columns; i < bytes.size() * 8; ++i)
        if ((bytes[i / 8] >> (i % 8)) & 1u)
            throw StructuralError("schedule mask: trailing bits set");
    return to_snn;
}

// --- config JSON --------------------------------------------------------

inline Json to_json(const CoreCost& c) {
    return Json{{"eps", c.energy_per_match}, {"zeta", c.energy_per_column},
                {"beta", c.time_per_match},  {"delta", c.time_per_column},
                {"alpha", c.launch_time},    {"pes", c.pes}};
}

inline CoreCost core_cost_from_json(const Json& j) {
    CoreCost c;
    c.energy_per_match = j.at("eps").get<double>();
    c.energy_per_column = j.at("zeta").get<double>();
    c.time_per_match = j.at("beta").get<double>();
    c.time_per_column = j.at("delta").get<double>();
    c.launch_time = j.at("alpha").get<double>();
    c.pes = j.at("pes").get<int>();
    return c;
}

inline Json to_json(const CostParams& p) {
    return Json{{"snn", to_json(p.snn)},
                {"ann", to_json(p.ann)},
                {"lambda", p.lambda_weight}};
}

inline CostParams cost_params_from_json(const Json& j) {
    CostParams p;
    p.snn = core_cost_from_json(j.at("snn"));
    p.ann = core_cost_from_json(j.at("ann"));
    p.lambda_weight = j.at("lambda").get<double>();
    p.validate();
    return p;
}

inline Json to_json(const QuantConfig& q) {
    return Json{{"levels", q.levels}, {"threshold", q.threshold}};
}

inline QuantConfig quant_config_from_json(const Json& j) {
    return QuantConfig::make(j.at("levels").get<int>(),
                             j.at("threshold").get<int>());
}

inline Json to_json(const HardwareConfig& hw) {
    return Json{{"snn_pes", hw.snn_pes},
                {"ann_pes", hw.ann_pes},
                {"cache_bytes", hw.cache_bytes},
                {"cache_banks", hw.cache_banks},
                {"cache_assoc", hw.cache_assoc},
                {"cache_line_bytes", hw.cache_line_bytes},
                {"chunk_bits", hw.chunk_bits},
                {"clock_hz", hw.clock_hz},
                {"hbm_bytes_per_cycle", hw.hbm_bytes_per_cycle},
                {"inner_join_units", hw.inner_join_units},
                {"launch_cycles", hw.launch_cycles},
                {"hbm_first_access_cycles", hw.hbm_first_access_cycles},
                {"warmup_per_chunk", hw.warmup_per_chunk}};
}

inline HardwareConfig hardware_from_json(const Json& j) {
    HardwareConfig hw;
    hw.snn_pes = j.value("snn_pes", hw.snn_pes);
    hw.ann_pes = j.value("ann_pes", hw.ann_pes);
    hw.cache_bytes = j.value("cache_bytes", hw.cache_bytes);
    hw.cache_banks = j.value("cache_banks", hw.cache_banks);
    hw.cache_assoc = j.value("cache_assoc", hw.cache_assoc);
    hw.cache_line_bytes = j.value("cache_line_bytes", hw.cache_line_bytes);
    hw.chunk_bits = j.value("chunk_bits", hw.chunk_bits);
    hw.clock_hz = j.value("clock_hz", hw.clock_hz);
    hw.hbm_bytes_per_cycle =
        j.value("hbm_bytes_per_cycle", hw.hbm_bytes_per_cycle);
    hw.inner_join_units = j.value("inner_join_units", hw.inner_join_units);
    hw.launch_cycles = j.value("launch_cycles", hw.launch_cycles);
    hw.hbm_first_access_cycles =
        j.value("hbm_first_access_cycles", hw.hbm_first_access_cycles);
    hw.warmup_per_chunk = j.value("warmup_per_chunk", hw.warmup_per_chunk);
    hw.validate();
    return hw;
}

inline Json to_json(const EnergyWeights& w) {
    return Json{{"cache_access", w.cache_access},
                {"hbm_byte", w.hbm_byte},
                {"crossbar_beat", w.crossbar_beat},
                {"fast_prefix", w.fast_prefix},
                {"laggy_prefix", w.laggy_prefix},
                {"mac", w.mac},
                {"gated_accumulate", w.gated_accumulate},
                {"spike_gen", w.spike_gen},
                {"qcfs_eval", w.qcfs_eval},
                {"soft_reset_step", w.soft_reset_step},
                {"control_per_cycle", w.control_per_cycle}};
}

inline EnergyWeights energy_weights_from_json(const Json& j) {
    EnergyWeights d = EnergyWeights::defaults();
    EnergyWeights w;
    w.cache_access = j.value("cache_access", d.cache_access);
    w.hbm_byte = j.value("hbm_byte", d.hbm_byte);
    w.crossbar_beat = j.value("crossbar_beat", d.crossbar_beat);
    w.fast_prefix = j.value("fast_prefix", d.fast_prefix);
    w.laggy_prefix = j.value("laggy_prefix", d.laggy_prefix);
    w.mac = j.value("mac", d.mac);
    w.gated_accumulate = j.value("gated_accumulate", d.gated_accumulate);
    w.spike_gen = j.value("spike_gen", d.spike_gen);
    w.qcfs_eval = j.value("qcfs_eval", d.qcfs_eval);
    w.soft_reset_step = j.value("soft_reset_step", d.soft_reset_step);
    w.control_per_cycle = j.value("control_per_cycle", d.control_per_cycle);
    w.validate();
    return w;
}

inline Json to_json(const LayerDescriptor& d) {
    Json j{{"name", d.name},
           {"kind", d.kind == LayerDescriptor::Kind::Gemm ? "gemm" : "conv"},
           {"act_density", d.act_density},
           {"weight_density", d.weight_density},
           {"zipf_exponent", d.zipf_exponent},
           {"levels", d.levels},
           {"threshold", d.threshold}};
    if (d.kind == LayerDescriptor::Kind::Gemm) {
        j["m"] = d.shape.m;
        j["k"] = d.shape.k;
        j["n"] = d.shape.n;
    } else {
        j["in_h"] = d.in_h;
        j["in_w"] = d.in_w;
        j["in_c"] = d.in_c;
        j["kernel_h"] = d.kernel_h;
        j["kernel_w"] = d.kernel_w;
        j["out_c"] = d.out_c;
        j["stride"] = d.stride;
        j["pad"] = d.pad;
    }
    return j;
}

inline LayerDescriptor layer_from_json(const Json& j) {
    std::string kind = j.at("kind").get<std::string>();
    LayerDescriptor d;
    if (kind == "gemm") {
        d = LayerDescriptor::gemm(j.at("name").get<std::string>(),
                                  j.at("m").get<std::size_t>(),
                                  j.at("k").get<std::size_t>(),
                                  j.at("n").get<std::size_t>());
    } else if (kind == "conv") {
        d = LayerDescriptor::conv(
            j.at("name").get<std::string>(), j.at("in_h").get<int>(),
            j.at("in_w").get<int>(), j.at("in_c").get<int>(),
            j.at("kernel_h").get<int>(), j.at("out_c").get<int>(),
            j.at("stride").get<int>(), j.at("pad").get<int>());
        d.kernel_w = j.at("kernel_w").get<int>();
    } else {
        throw ConfigError("layer descriptor: unknown kind '" + kind + "'");
    }
    d.act_density = j.value("act_density", d.act_density);
    d.weight_density = j.value("weight_density", d.weight_density);
    d.zipf_exponent = j.value("zipf_exponent", d.zipf_exponent);
    d.levels = j.value("levels", d.levels);
    d.threshold = j.value("threshold", d.threshold);
    return d;
}

inline Json to_json(const NetworkDescriptor& net) {
    Json layers = Json::array();
    for (const auto& l : net.layers) layers.push_back(to_json(l));
    return Json{{"name", net.name},
                {"balanced", net.balanced},
                {"layers", layers}};
}

inline NetworkDescriptor network_from_json(const Json& j) {
    NetworkDescriptor net;
    net.name = j.at("name").get<std::string>();
    net.balanced = j.value("balanced", false);
    for (const auto& l : j.at("layers")) net.layers.push_back(layer_from_json(l));
    return net;
}

// --- provenance hashes --------------------------------------------------

inline std::string params_hash(const CostParams& p) {
    Fnv1a h;
    h.update_str(to_json(p).dump());
    return h.hex();
}

inline std::string stats_hash(const ColumnStats& stats) {
    Fnv1a h;
    h.update_u64(stats.r_hat.size());
    for (double r : stats.r_hat) h.update_double(r);
    h.update_double(stats.q);
    return h.hex();
}

// --- schedule artifact ----------------------------------------------------

struct ScheduleLayer {
    std::string layer_name;
    Assignment assignment;
};

struct ScheduleArtifact {
    std::vector<ScheduleLayer> layers;
    std::string strategy;
    std::uint64_t seed = 0;
    std::string params_digest;
    std::string stats_digest;
    std::vector<std::string> warnings;
};

inline Json to_json(const CorePacking& p) {
    Json pes = Json::array();
    for (const auto& pe : p.pe_columns) pes.push_back(pe);
    return pes;
}

inline CorePacking packing_from_json(const Json& j) {
    CorePacking p;
    for (const auto& pe : j)
        p.pe_columns.push_back(pe.get<std::vector<std::uint32_t>>());
    return p;
}

inline Json to_json(const ScheduleArtifact& art) {
    Json layers = Json::array();
    for (const auto& layer : art.layers) {
        const Assignment& a = layer.assignment;
        layers.push_back(Json{{"name", layer.layer_name},
                              {"columns", a.to_snn.size()},
                              {"mask", base64_encode(pack_mask(a.to_snn))},
                              {"snn_packing", to_json(a.snn_packing)},
                              {"ann_packing", to_json(a.ann_packing)}});
    }
    return Json{{"layers", layers},
                {"strategy", art.strategy},
                {"seed", art.seed},
                {"params_hash", art.params_digest},
                {"stats_hash", art.stats_digest},
                {"warnings", art.warnings}};
}

inline ScheduleArtifact schedule_from_json(const Json& j) {
    ScheduleArtifact art;
    art.strategy = j.at("strategy").get<std::string>();
    art.seed = j.at("seed").get<std::uint64_t>();
    art.params_digest = j.at("params_hash").get<std::string>();
    art.stats_digest = j.at("stats_hash").get<std::string>();
    if (j.contains("warnings"))
        art.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& lj : j.at("layers")) {
        ScheduleLayer layer;
        layer.layer_name = lj.at("name").get<std::string>();
        std::size_t columns = lj.at("columns").get<std::size_t>();
        Assignment& a = layer.assignment;
        a.to_snn = unpack_mask(base64_decode(lj.at("mask").get<std::string>()),
                               columns);
        a.snn_packing = packing_from_json(lj.at("snn_packing"));
        a.ann_packing = packing_from_json(lj.at("ann_packing"));
        a.packed = true;
        detail::check_packing(a, a.snn_packing, true);
        detail::check_packing(a, a.ann_packing, false);
        art.layers.push_back(std::move(layer));
    }
    return art;
}

// Reload check: mismatched hashes indicate stale upstream artifacts and are
// reported as warnings, not errors.
inline std::vector<std::string> provenance_warnings(
    const ScheduleArtifact& art, const std::string& expected_params,
    const std::string& expected_stats) {
    std::vector<std::string> out;
    if (art.params_digest != expected_params)
        out.push_back("schedule was produced with different cost parameters");
    if (art.stats_digest != expected_stats)
        out.push_back("schedule was produced with different column statistics");
    return out;
}

// --- report JSON / CSV ---------------------------------------------------

inline Json to_json(const SimReport& r) {
    Json energy = Json::object();
    for (const auto& [key, value] : r.energy) energy[key] = value;
    return Json{{"total_cycles", r.total_cycles},
                {"launch_cycles", r.launch_cycles},
                {"stall_cycles", r.stall_cycles},
                {"fetch_exposed_cycles", r.fetch_exposed_cycles},
                {"snn_busy", r.snn_busy},
                {"ann_busy", r.ann_busy},
                {"energy", energy},
                {"total_energy", r.total_energy()},
                {"edp", r.edp()},
                {"utilization", utilization(r)},
                {"total_matches", r.total_matches},
                {"cache_accesses", r.cache_accesses},
                {"cache_capacity_miss_bytes", r.cache_capacity_miss_bytes},
                {"bank_conflicts", r.bank_conflicts},
                {"hbm_bytes", r.hbm_bytes}};
}

// Flat metric rows for plotting pipelines: metric,value with energy keys
// prefixed. Row order is fixed.
inline std::string report_csv(const SimReport& r) {
    std::ostringstream out;
    out << "metric,value\n";
    out << "total_cycles," << r.total_cycles << "\n";
    out << "launch_cycles," << r.launch_cycles << "\n";
    out << "stall_cycles," << r.stall_cycles << "\n";
    out << "fetch_exposed_cycles," << r.fetch_exposed_cycles << "\n";
    out << "total_matches," << r.total_matches << "\n";
    out << "cache_accesses," << r.cache_accesses << "\n";
    out << "cache_capacity_miss_bytes," << r.cache_capacity_miss_bytes << "\n";
    out << "bank_conflicts," << r.bank_conflicts << "\n";
    out << "hbm_bytes," << r.hbm_bytes << "\n";
    char buf[64];
    auto put = [&](const std::string& key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << key << "," << buf << "\n";
    };
    put("total_energy", r.total_energy());
    put("edp", r.edp());
    put("utilization", utilization(r));
    for (const auto& [key, value] : r.energy) put("energy." + key, value);
    return out.str();
}

// --- file helpers ----------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("short write: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_json_file(const std::string& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline Json read_json_file(const std::string& path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
}

}  // namespace neuroflex
