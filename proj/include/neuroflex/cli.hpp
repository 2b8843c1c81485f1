#pragma once

// Batch orchestration over the offline toolchain: operand generation,
// profiling, calibration, scheduling, simulation, figure sweeps and the
// self-check suites. Stages communicate through JSON/CSV artifacts in the
// output directory; every artifact embeds content digests of its inputs so
// a stale upstream file is detected when it is read back.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "neuroflex/cyclesim.hpp"
#include "neuroflex/gemm.hpp"
#include "neuroflex/matrix_io.hpp"
#include "neuroflex/schedule.hpp"
#include "neuroflex/serialize.hpp"
#include "neuroflex/workload.hpp"

namespace neuroflex {

// --- strategies -------------------------------------------------------------

struct StrategySpec {
    enum class Kind { Cost, Random, AnnOnly, SnnOnly, Oracle, Layerwise };
    Kind kind = Kind::Cost;
    std::size_t layerwise_k = 0;
    std::string name;  // canonical spelling, used in artifact file names
};

inline StrategySpec parse_strategy(const std::string& name) {
    StrategySpec s;
    s.name = name;
    if (name == "cost") {
        s.kind = StrategySpec::Kind::Cost;
        return s;
    }
    if (name == "random") {
        s.kind = StrategySpec::Kind::Random;
        return s;
    }
    if (name == "ann-only") {
        s.kind = StrategySpec::Kind::AnnOnly;
        return s;
    }
    if (name == "snn-only") {
        s.kind = StrategySpec::Kind::SnnOnly;
        return s;
    }
    if (name == "oracle") {
        s.kind = StrategySpec::Kind::Oracle;
        return s;
    }
    const std::string prefix = "layerwise-";
    if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size()) {
        std::size_t k = 0;
        for (std::size_t i = prefix.size(); i < name.size(); ++i) {
            char c = name[i];
            if (c < '0' || c > '9')
                throw ConfigError("strategy '" + name +
                                  "': layerwise suffix must be an integer");
            k = k * 10 + static_cast<std::size_t>(c - '0');
        }
        s.kind = StrategySpec::Kind::Layerwise;
        s.layerwise_k = k;
        return s;
    }
    throw ConfigError("unknown strategy '" + name +
                      "' (expected cost, random, ann-only, snn-only, oracle, "
                      "or layerwise-<k>)");
}

// --- experiment configuration ------------------------------------------------

struct ExperimentConfig {
    std::vector<NetworkDescriptor> networks;
    HardwareConfig hardware;
    EnergyWeights weights = EnergyWeights::defaults();
    bool calibrate_params = true;  // cost_params: "calibrate" (the default)
    CostParams pinned_params;      // used when the config pins parameters
    std::vector<std::string> strategies{"cost"};
    std::uint64_t seed = 1;
    int samples = 8;
    double quantile = 0.9;
    std::string out_dir = "out";
};

namespace clidetail {

inline std::string digest(const std::string& text) {
    Fnv1a h;
    h.update_str(text);
    return h.hex();
}

// Layer names become artifact file names, so they must be path safe.
inline bool safe_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                  c == '.' || c == '-';
        if (!ok) return false;
    }
    return true;
}

inline Json parse_artifact(const std::string& text,
                           const std::filesystem::path& path) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

// Inputs depending only on the workload definition share one digest, so a
// changed descriptor set, seed or sample count invalidates operands and
// statistics together.
inline std::string workload_digest(const ExperimentConfig& cfg) {
    Json nets = Json::array();
    for (const auto& n : cfg.networks) nets.push_back(to_json(n));
    Json j{{"networks", nets}, {"samples", cfg.samples}, {"seed", cfg.seed}};
    return digest(j.dump());
}

inline std::string hardware_digest(const ExperimentConfig& cfg) {
    Json j{{"hardware", to_json(cfg.hardware)},
           {"energy_weights", to_json(cfg.weights)}};
    return digest(j.dump());
}

struct StagePaths {
    std::filesystem::path root;

    std::filesystem::path gen_dir() const { return root / "gen"; }
    std::filesystem::path manifest() const { return gen_dir() / "manifest.json"; }
    std::filesystem::path stats() const { return root / "stats.json"; }
    std::filesystem::path params() const { return root / "params.json"; }
    std::filesystem::path schedule(const std::string& strategy) const {
        return root / ("schedule." + strategy + ".json");
    }
    std::filesystem::path report_json(const std::string& strategy) const {
        return root / ("report." + strategy + ".json");
    }
    std::filesystem::path report_csv_file(const std::string& strategy) const {
        return root / ("report." + strategy + ".csv");
    }
    std::filesystem::path sweep_csv(const std::string& axis) const {
        return root / ("sweep." + axis + ".csv");
    }
};

inline std::string require_artifact(const std::filesystem::path& path,
                                    const std::string& stage) {
    if (!std::filesystem::exists(path))
        throw ConfigError("missing artifact " + path.string() + "; run the '" +
                          stage + "' stage first");
    return read_text_file(path.string());
}

// Worker pool for sweep points: NEUROFLEX_WORKERS pins the size, otherwise
// the hardware concurrency is used. Results land in caller-indexed slots so
// assembly order never depends on completion order.
inline int worker_count(std::size_t jobs) {
    long n = 0;
    if (const char* env = std::getenv("NEUROFLEX_WORKERS")) {
        char* end = nullptr;
        n = std::strtol(env, &end, 10);
        if (env[0] == '\0' || end == nullptr || *end != '\0' || n < 1)
            throw ConfigError("NEUROFLEX_WORKERS must be a positive integer");
    } else {
        unsigned hc = std::thread::hardware_concurrency();
        n = hc > 0 ? static_cast<long>(hc) : 1;
    }
    if (jobs < 1) jobs = 1;
    return static_cast<int>(std::min<long>(n, static_cast<long>(jobs)));
}

template <typename Fn>
inline void parallel_for(std::size_t jobs, Fn&& fn) {
    int workers = worker_count(jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace clidetail

inline ExperimentConfig config_from_json(const Json& j) {
    static const std::set<std::string> known{
        "suite",     "networks",       "quant",      "hardware",
        "energy_weights", "cost_params", "strategies", "seed",
        "samples",   "quantile",       "out_dir"};
    if (!j.is_object())
        throw ConfigError("experiment config: top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("experiment config: unknown key '" + it.key() +
                              "'");

    ExperimentConfig cfg;
    bool has_suite = j.contains("suite");
    bool has_networks = j.contains("networks");
    if (has_suite == has_networks)
        throw ConfigError(
            "experiment config: exactly one of 'suite' and 'networks' is "
            "required");
    if (has_suite) {
        std::string suite = j.at("suite").get<std::string>();
        if (suite != "reference")
            throw ConfigError("experiment config: unknown suite '" + suite +
                              "'");
        cfg.networks = reference_suite();
    } else {
        for (const auto& nj : j.at("networks"))
            cfg.networks.push_back(network_from_json(nj));
        if (cfg.networks.empty())
            throw ConfigError("experiment config: 'networks' must be non-empty");
    }
    if (j.contains("quant")) {
        QuantConfig q = quant_config_from_json(j.at("quant"));
        for (auto& net : cfg.networks)
            for (auto& layer : net.layers) {
                layer.levels = q.levels;
                layer.threshold = q.threshold;
            }
    }
    if (j.contains("hardware"))
        cfg.hardware = hardware_from_json(j.at("hardware"));
    if (j.contains("energy_weights"))
        cfg.weights = energy_weights_from_json(j.at("energy_weights"));
    if (j.contains("cost_params")) {
        const Json& cp = j.at("cost_params");
        if (cp.is_string()) {
            if (cp.get<std::string>() != "calibrate")
                throw ConfigError(
                    "experiment config: cost_params must be \"calibrate\" or "
                    "a parameter object");
        } else {
            cfg.calibrate_params = false;
            cfg.pinned_params = cost_params_from_json(cp);
            if (cfg.pinned_params.snn.pes != cfg.hardware.snn_pes ||
                cfg.pinned_params.ann.pes != cfg.hardware.ann_pes)
                throw ConfigError(
                    "experiment config: cost_params PE counts disagree with "
                    "hardware");
        }
    }
    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& sj : j.at("strategies"))
            cfg.strategies.push_back(sj.get<std::string>());
        if (cfg.strategies.empty())
            throw ConfigError("experiment config: strategies must be non-empty");
    }
    for (const auto& s : cfg.strategies) parse_strategy(s);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.samples = j.value("samples", cfg.samples);
    if (cfg.samples < 1)
        throw ConfigError("experiment config: samples must be >= 1");
    cfg.quantile = j.value("quantile", cfg.quantile);
    if (!(cfg.quantile > 0.0 && cfg.quantile < 1.0))
        throw ConfigError("experiment config: quantile must lie in (0, 1)");
    cfg.out_dir = j.value("out_dir", cfg.out_dir);

    std::set<std::string> net_names, layer_names;
    for (const auto& net : cfg.networks) {
        if (!net_names.insert(net.name).second)
            throw ConfigError("duplicate network name '" + net.name + "'");
        if (net.layers.empty())
            throw ConfigError("network '" + net.name + "' has no layers");
        for (const auto& layer : net.layers) {
            if (!clidetail::safe_name(layer.name))
                throw ConfigError("layer name '" + layer.name +
                                  "' is not filesystem safe");
            if (!layer_names.insert(layer.name).second)
                throw ConfigError("duplicate layer name '" + layer.name + "'");
            (void)layer.quant();    // validates levels and threshold
            (void)layer.lowered();  // validates the shape
        }
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    Json j = read_json_file(path);
    try {
        return config_from_json(j);
    } catch (const Json::exception& e) {
        throw ConfigError("experiment config " + path + ": " + e.what());
    }
}

namespace clidetail {

inline std::map<std::string, const LayerDescriptor*> descriptor_index(
    const ExperimentConfig& cfg) {
    std::map<std::string, const LayerDescriptor*> index;
    for (const auto& net : cfg.networks)
        for (const auto& layer : net.layers) index[layer.name] = &layer;
    return index;
}

// --- loaded upstream artifacts ---------------------------------------------

struct LayerStatsEntry {
    std::string network;
    std::string name;
    ColumnStats stats;
};

struct StatsBundle {
    std::vector<LayerStatsEntry> layers;
    std::string text_digest;
    std::string workload;
};

inline StatsBundle load_stats(const StagePaths& paths) {
    std::string text = require_artifact(paths.stats(), "profile");
    Json j = parse_artifact(text, paths.stats());
    StatsBundle bundle;
    bundle.text_digest = digest(text);
    bundle.workload = j.at("workload").get<std::string>();
    for (const auto& lj : j.at("layers")) {
        LayerStatsEntry entry;
        entry.network = lj.at("network").get<std::string>();
        entry.name = lj.at("name").get<std::string>();
        entry.stats =
            ColumnStats::from_matches(lj.at("r_hat").get<std::vector<double>>());
        bundle.layers.push_back(std::move(entry));
    }
    return bundle;
}

// Calibration entries are keyed by quantization config plus bench geometry:
// parameters are fitted at each layer's stream geometry so the per-column
// constants and energy slopes are layer-true.
using ParamsKey = std::tuple<int, int, std::int64_t, std::int64_t, std::int64_t>;

inline BenchGeometry geometry_for(const LayerDescriptor& desc) {
    GemmShape s = desc.lowered();
    return bench_geometry_for_layer(static_cast<std::int64_t>(s.m),
                                    static_cast<std::int64_t>(s.k),
                                    desc.act_density);
}

inline ParamsKey params_key(int levels, int threshold,
                            const BenchGeometry& g) {
    return {levels, threshold, g.rows, g.depth,
            std::llround(g.act_density * 1e6)};
}

struct ParamsBundle {
    std::map<ParamsKey, CostParams> by_quant;
    std::string digest_value;
};

inline ParamsBundle load_params(const ExperimentConfig& cfg,
                                const StagePaths& paths) {
    ParamsBundle bundle;
    if (!cfg.calibrate_params) {
        bundle.digest_value =
            digest("inline:" + to_json(cfg.pinned_params).dump());
        return bundle;
    }
    std::string text = require_artifact(paths.params(), "calibrate");
    Json j = parse_artifact(text, paths.params());
    if (j.at("hardware").get<std::string>() != hardware_digest(cfg))
        throw ConfigError(
            "cost parameters were calibrated for a different hardware "
            "config; rerun 'calibrate'");
    bundle.digest_value = digest(text);
    for (const auto& ej : j.at("entries")) {
        BenchGeometry g;
        const Json& gj = ej.at("geometry");
        g.rows = gj.at("rows").get<std::int64_t>();
        g.depth = gj.at("depth").get<std::int64_t>();
        g.act_density = gj.at("act_density").get<double>();
        bundle.by_quant[params_key(ej.at("levels").get<int>(),
                                   ej.at("threshold").get<int>(), g)] =
            cost_params_from_json(ej.at("params"));
    }
    return bundle;
}

inline CostParams params_for(const ParamsBundle& bundle,
                             const ExperimentConfig& cfg,
                             const LayerDescriptor& desc) {
    if (!cfg.calibrate_params) return cfg.pinned_params;
    auto it = bundle.by_quant.find(
        params_key(desc.levels, desc.threshold, geometry_for(desc)));
    if (it == bundle.by_quant.end())
        throw ConfigError("no calibrated parameters for levels=" +
                          std::to_string(desc.levels) + ", threshold=" +
                          std::to_string(desc.threshold) +
                          " at this layer geometry; rerun 'calibrate'");
    return it->second;
}

// --- report assembly ---------------------------------------------------------

inline SimReport aggregate_reports(const std::vector<SimReport>& reports) {
    SimReport total;
    if (reports.empty()) return total;
    total.snn_busy.assign(reports.front().snn_busy.size(), 0);
    total.ann_busy.assign(reports.front().ann_busy.size(), 0);
    for (const auto& r : reports) {
        total.total_cycles += r.total_cycles;
        total.launch_cycles += r.launch_cycles;
        total.stall_cycles += r.stall_cycles;
        total.fetch_exposed_cycles += r.fetch_exposed_cycles;
        total.total_matches += r.total_matches;
        total.cache_accesses += r.cache_accesses;
        total.cache_capacity_miss_bytes += r.cache_capacity_miss_bytes;
        total.bank_conflicts += r.bank_conflicts;
        total.hbm_bytes += r.hbm_bytes;
        for (std::size_t p = 0; p < total.snn_busy.size(); ++p)
            total.snn_busy[p] += r.snn_busy[p];
        for (std::size_t p = 0; p < total.ann_busy.size(); ++p)
            total.ann_busy[p] += r.ann_busy[p];
        for (const auto& [key, value] : r.energy) total.energy[key] += value;
    }
    return total;
}

// One CSV with a network column: per-network rows reuse the fixed metric row
// set, then the overall power shares are appended.
inline std::string multi_report_csv(
    const std::vector<std::pair<std::string, const SimReport*>>& rows,
    const PowerBreakdown& overall_power) {
    std::ostringstream out;
    out << "network,metric,value\n";
    for (const auto& [name, report] : rows) {
        std::string body = report_csv(*report);
        std::size_t start = body.find('\n') + 1;  // skip the header row
        while (start < body.size()) {
            std::size_t end = body.find('\n', start);
            out << name << "," << body.substr(start, end - start) << "\n";
            start = end + 1;
        }
    }
    char buf[64];
    auto put = [&](const std::string& key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << "overall," << key << "," << buf << "\n";
    };
    put("power.cache_share", overall_power.cache_share);
    put("power.ann_share", overall_power.ann_share);
    put("power.snn_share", overall_power.snn_share);
    return out.str();
}

}  // namespace clidetail

// --- pipeline stages ---------------------------------------------------------

inline int cmd_gen(const ExperimentConfig& cfg) {
    clidetail::StagePaths paths{cfg.out_dir};
    std::filesystem::create_directories(paths.gen_dir());

    Json matrices = Json::array();
    std::size_t layer_count = 0;
    for (const auto& net : cfg.networks) {
        for (const auto& desc : net.layers) {
            BitmapMatrix weights = gen_weights(desc, cfg.seed);
            std::string wrel = "gen/" + desc.name + ".weights.nfbm";
            save_matrix(paths.root / wrel, weights);
            Json acts = Json::array();
            for (int s = 0; s < cfg.samples; ++s) {
                BitmapMatrix a = gen_activations(desc, cfg.seed, s);
                std::string arel =
                    "gen/" + desc.name + ".s" + std::to_string(s) + ".acts.nfbm";
                save_matrix(paths.root / arel, a);
                acts.push_back(arel);
            }
            matrices.push_back(Json{{"layer", desc.name},
                                    {"network", net.name},
                                    {"weights", wrel},
                                    {"activations", acts}});
            ++layer_count;
        }
    }
    Json nets = Json::array();
    for (const auto& n : cfg.networks) nets.push_back(to_json(n));
    Json manifest{{"matrices", matrices},
                  {"networks", nets},
                  {"samples", cfg.samples},
                  {"seed", cfg.seed},
                  {"workload", clidetail::workload_digest(cfg)}};
    write_json_file(paths.manifest().string(), manifest);
    std::cout << "gen: " << layer_count << " layers, " << cfg.samples
              << " samples -> " << paths.gen_dir().string() << "\n";
    return 0;
}

inline int cmd_profile(const ExperimentConfig& cfg) {
    clidetail::StagePaths paths{cfg.out_dir};
    std::string manifest_text =
        clidetail::require_artifact(paths.manifest(), "gen");
    Json manifest = clidetail::parse_artifact(manifest_text, paths.manifest());
    if (manifest.at("workload").get<std::string>() !=
        clidetail::workload_digest(cfg))
        throw ConfigError(
            "generated operands do not match this config; rerun 'gen'");

    Json layers = Json::array();
    for (const auto& entry : manifest.at("matrices")) {
        BitmapMatrix weights =
            load_matrix(paths.root / entry.at("weights").get<std::string>());
        std::vector<std::vector<std::int64_t>> samples(weights.cols);
        for (const auto& apath : entry.at("activations")) {
            BitmapMatrix acts =
                load_matrix(paths.root / apath.get<std::string>());
            std::vector<std::int64_t> totals = column_match_totals(acts, weights);
            for (std::size_t n = 0; n < totals.size(); ++n)
                samples[n].push_back(totals[n]);
        }
        ColumnStats stats = quantile_stats(samples, cfg.quantile);
        layers.push_back(Json{{"network", entry.at("network")},
                              {"name", entry.at("layer")},
                              {"r_hat", stats.r_hat}});
    }
    Json out{{"layers", layers},
             {"quantile", cfg.quantile},
             {"workload", manifest.at("workload")}};
    write_json_file(paths.stats().string(), out);
    std::cout << "profile: " << layers.size() << " layers -> "
              << paths.stats().string() << "\n";
    return 0;
}

inline int cmd_calibrate(const ExperimentConfig& cfg) {
    clidetail::StagePaths paths{cfg.out_dir};
    std::filesystem::create_directories(paths.root);

    std::map<clidetail::ParamsKey, CalibrationResult> entries;
    for (const auto& net : cfg.networks)
        for (const auto& desc : net.layers) {
            BenchGeometry geom = clidetail::geometry_for(desc);
            clidetail::ParamsKey key =
                clidetail::params_key(desc.levels, desc.threshold, geom);
            if (entries.count(key)) continue;
            entries.emplace(key,
                            calibrate_cost_params(cfg.hardware, cfg.weights,
                                                  desc.quant(), geom));
        }
    Json list = Json::array();
    for (const auto& [key, result] : entries)
        list.push_back(Json{{"levels", std::get<0>(key)},
                            {"threshold", std::get<1>(key)},
                            {"geometry",
                             Json{{"rows", result.geometry.rows},
                                  {"depth", result.geometry.depth},
                                  {"act_density", result.geometry.act_density}}},
                            {"params", to_json(result.params)},
                            {"max_energy_residual", result.max_energy_residual},
                            {"max_latency_residual",
                             result.max_latency_residual}});
    Json out{{"entries", list}, {"hardware", clidetail::hardware_digest(cfg)}};
    write_json_file(paths.params().string(), out);
    std::cout << "calibrate: " << list.size() << " quantization configs -> "
              << paths.params().string() << "\n";
    return 0;
}

inline int cmd_schedule(const ExperimentConfig& cfg,
                        const std::vector<std::string>& strategies) {
    clidetail::StagePaths paths{cfg.out_dir};
    clidetail::StatsBundle stats = clidetail::load_stats(paths);
    if (stats.workload != clidetail::workload_digest(cfg))
        throw ConfigError(
            "column statistics come from a different workload; rerun "
            "'profile'");
    clidetail::ParamsBundle params = clidetail::load_params(cfg, paths);
    auto index = clidetail::descriptor_index(cfg);

    for (const std::string& strategy : strategies) {
        StrategySpec spec = parse_strategy(strategy);
        ScheduleArtifact art;
        art.strategy = spec.name;
        art.seed = cfg.seed;
        art.params_digest = params.digest_value;
        art.stats_digest = stats.text_digest;

        std::map<std::string, std::size_t> position_in_net;
        for (const auto& entry : stats.layers) {
            auto dit = index.find(entry.name);
            if (dit == index.end())
                throw ConfigError("column statistics cover unknown layer '" +
                                  entry.name + "'; rerun 'profile'");
            CostParams p = clidetail::params_for(params, cfg, *dit->second);
            std::size_t position = position_in_net[entry.network]++;

            ScheduleResult result;
            switch (spec.kind) {
                case StrategySpec::Kind::Cost: {
                    SweptSchedule swept = schedule_cost_swept(entry.stats, p);
                    result = std::move(swept.result);
                    break;
                }
                case StrategySpec::Kind::Random:
                    result = schedule_random(
                        entry.stats, p,
                        cfg.seed ^ wldetail::name_label(entry.name));
                    break;
                case StrategySpec::Kind::AnnOnly:
                    result = schedule_single_mode(false, entry.stats, p);
                    break;
                case StrategySpec::Kind::SnnOnly:
                    result = schedule_single_mode(true, entry.stats, p);
                    break;
                case StrategySpec::Kind::Oracle: {
                    OracleResult oracle = brute_force_min_edp(entry.stats, p);
                    result.assignment = std::move(oracle.assignment);
                    break;
                }
                case StrategySpec::Kind::Layerwise:
                    // k larger than the network is clamped: every layer runs
                    // on the spiking core.
                    result = schedule_single_mode(position < spec.layerwise_k,
                                                  entry.stats, p);
                    break;
            }
            for (const auto& w : result.warnings)
                art.warnings.push_back(entry.name + ": " + w);
            art.layers.push_back({entry.name, std::move(result.assignment)});
        }
        write_json_file(paths.schedule(spec.name).string(), to_json(art));
        std::cout << "schedule[" << spec.name << "]: " << art.layers.size()
                  << " layers -> " << paths.schedule(spec.name).string()
                  << "\n";
    }
    return 0;
}

inline int cmd_simulate(const ExperimentConfig& cfg,
                        const std::vector<std::string>& strategies) {
    clidetail::StagePaths paths{cfg.out_dir};
    std::string manifest_text =
        clidetail::require_artifact(paths.manifest(), "gen");
    Json manifest = clidetail::parse_artifact(manifest_text, paths.manifest());
    if (manifest.at("workload").get<std::string>() !=
        clidetail::workload_digest(cfg))
        throw ConfigError(
            "generated operands do not match this config; rerun 'gen'");
    clidetail::StatsBundle stats = clidetail::load_stats(paths);
    clidetail::ParamsBundle params = clidetail::load_params(cfg, paths);

    std::map<std::string, Json> matrix_index;
    for (const auto& entry : manifest.at("matrices"))
        matrix_index[entry.at("layer").get<std::string>()] = entry;

    for (const std::string& strategy : strategies) {
        StrategySpec spec = parse_strategy(strategy);
        std::filesystem::path spath = paths.schedule(spec.name);
        std::string stext = clidetail::require_artifact(spath, "schedule");
        ScheduleArtifact art =
            schedule_from_json(clidetail::parse_artifact(stext, spath));

        std::vector<std::string> warnings =
            provenance_warnings(art, params.digest_value, stats.text_digest);
        for (const auto& w : art.warnings)
            warnings.push_back("schedule: " + w);

        std::map<std::string, const Assignment*> assign_index;
        for (const auto& layer : art.layers)
            assign_index[layer.layer_name] = &layer.assignment;

        Json networks_json = Json::array();
        std::vector<SimReport> net_reports;
        for (const auto& net : cfg.networks) {
            std::vector<BitmapMatrix> acts_store, weights_store;
            acts_store.reserve(net.layers.size());
            weights_store.reserve(net.layers.size());
            std::vector<LayerJob> jobs;
            jobs.reserve(net.layers.size());
            for (const auto& desc : net.layers) {
                auto mit = matrix_index.find(desc.name);
                if (mit == matrix_index.end())
                    throw ConfigError("generated operands do not cover layer '" +
                                      desc.name + "'; rerun 'gen'");
                auto ait = assign_index.find(desc.name);
                if (ait == assign_index.end())
                    throw ConfigError("schedule does not cover layer '" +
                                      desc.name + "'; rerun 'schedule'");
                weights_store.push_back(load_matrix(
                    paths.root / mit->second.at("weights").get<std::string>()));
                acts_store.push_back(load_matrix(
                    paths.root /
                    mit->second.at("activations").at(0).get<std::string>()));
                jobs.push_back(LayerJob{&acts_store.back(),
                                        &weights_store.back(), desc.quant(),
                                        ait->second});
            }
            NetworkResult result =
                simulate_network(jobs, cfg.hardware, cfg.weights);
            Json layer_list = Json::array();
            for (std::size_t i = 0; i < net.layers.size(); ++i)
                layer_list.push_back(
                    Json{{"name", net.layers[i].name},
                         {"report", to_json(result.layer_reports[i])}});
            networks_json.push_back(Json{{"name", net.name},
                                         {"total", to_json(result.report)},
                                         {"layers", layer_list}});
            net_reports.push_back(std::move(result.report));
        }

        SimReport overall = clidetail::aggregate_reports(net_reports);
        PowerBreakdown power = power_breakdown(overall);
        Json report{{"strategy", spec.name},
                    {"warnings", warnings},
                    {"networks", networks_json},
                    {"overall", to_json(overall)},
                    {"power", Json{{"cache_share", power.cache_share},
                                   {"ann_share", power.ann_share},
                                   {"snn_share", power.snn_share}}}};
        write_json_file(paths.report_json(spec.name).string(), report);

        std::vector<std::pair<std::string, const SimReport*>> rows;
        for (std::size_t i = 0; i < cfg.networks.size(); ++i)
            rows.emplace_back(cfg.networks[i].name, &net_reports[i]);
        rows.emplace_back("overall", &overall);
        write_text_file(paths.report_csv_file(spec.name).string(),
                        clidetail::multi_report_csv(rows, power));

        std::cout << "simulate[" << spec.name << "]: " << cfg.networks.size()
                  << " networks -> " << paths.report_json(spec.name).string()
                  << " (cycles=" << overall.total_cycles
                  << ", utilization=" << utilization(overall) << ")\n";
    }
    return 0;
}

// --- figure sweeps -----------------------------------------------------------

namespace clidetail {

struct SweepPoint {
    std::string label;
    std::vector<NetworkDescriptor> networks;
    HardwareConfig hardware;
};

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg,
                                            const std::string& axis) {
    std::vector<SweepPoint> points;
    auto base = [&](const char* label) {
        SweepPoint p;
        p.label = label;
        p.networks = cfg.networks;
        p.hardware = cfg.hardware;
        return p;
    };
    if (axis == "sparsity") {
        // Points are labeled by activation sparsity percent.
        const std::pair<const char*, double> grid[] = {
            {"90", 0.10}, {"60", 0.40}, {"25", 0.75}};
        for (const auto& [label, density] : grid) {
            SweepPoint p = base(label);
            for (auto& net : p.networks)
                for (auto& layer : net.layers) layer.act_density = density;
            points.push_back(std::move(p));
        }
    } else if (axis == "quant_pair") {
        // (L, T) pairs: L quantization levels, T = 3L - 1 total timesteps.
        const std::pair<const char*, int> grid[] = {
            {"L2_T5", 2}, {"L4_T11", 4}, {"L8_T23", 8}};
        for (const auto& [label, levels] : grid) {
            SweepPoint p = base(label);
            for (auto& net : p.networks)
                for (auto& layer : net.layers) {
                    layer.levels = levels;
                    (void)layer.quant();  // threshold must stay divisible
                }
            points.push_back(std::move(p));
        }
    } else if (axis == "core_split") {
        const std::tuple<const char*, int, int> grid[] = {
            {"snn6_ann10", 6, 10}, {"snn8_ann8", 8, 8}, {"snn10_ann6", 10, 6}};
        for (const auto& [label, snn, ann] : grid) {
            SweepPoint p = base(label);
            p.hardware.snn_pes = snn;
            p.hardware.ann_pes = ann;
            points.push_back(std::move(p));
        }
    } else {
        throw ConfigError("unknown sweep axis '" + axis +
                          "' (expected sparsity, quant_pair, or core_split)");
    }
    return points;
}

struct SweepRow {
    std::string label;
    std::int64_t delay = 0;
    double energy = 0.0;
    double edp_value = 0.0;
    double util = 0.0;
};

// One sweep point is a full in-memory pipeline: profile, parameters, cost
// schedule, simulation; nothing on disk, so points are independent.
inline SweepRow run_sweep_point(const ExperimentConfig& cfg,
                                const SweepPoint& point) {
    std::map<ParamsKey, CostParams> params_cache;
    auto point_params = [&](const LayerDescriptor& desc) {
        BenchGeometry geom = geometry_for(desc);
        ParamsKey key = params_key(desc.levels, desc.threshold, geom);
        auto it = params_cache.find(key);
        if (it != params_cache.end()) return it->second;
        CostParams p;
        if (cfg.calibrate_params) {
            p = calibrate_cost_params(point.hardware, cfg.weights, desc.quant(),
                                      geom)
                    .params;
        } else {
            p = cfg.pinned_params;
            // The core-split axis moves PEs between cores, so pinned
            // parameters follow the point hardware.
            p.snn.pes = point.hardware.snn_pes;
            p.ann.pes = point.hardware.ann_pes;
        }
        params_cache.emplace(key, p);
        return p;
    };

    std::vector<SimReport> reports;
    for (const auto& net : point.networks) {
        std::vector<BitmapMatrix> acts_store, weights_store;
        std::vector<Assignment> assigns;
        acts_store.reserve(net.layers.size());
        weights_store.reserve(net.layers.size());
        assigns.reserve(net.layers.size());
        std::vector<LayerJob> jobs;
        jobs.reserve(net.layers.size());
        for (const auto& desc : net.layers) {
            ColumnStats stats =
                profile_layer(desc, cfg.seed, cfg.samples, cfg.quantile);
            SweptSchedule swept = schedule_cost_swept(stats, point_params(desc));
            assigns.push_back(std::move(swept.result.assignment));
            weights_store.push_back(gen_weights(desc, cfg.seed));
            acts_store.push_back(gen_activations(desc, cfg.seed, 0));
            jobs.push_back(LayerJob{&acts_store.back(), &weights_store.back(),
                                    desc.quant(), &assigns.back()});
        }
        reports.push_back(
            simulate_network(jobs, point.hardware, cfg.weights).report);
    }
    SimReport overall = aggregate_reports(reports);
    SweepRow row;
    row.label = point.label;
    row.delay = overall.total_cycles;
    row.energy = overall.total_energy();
    row.edp_value = overall.edp();
    row.util = utilization(overall);
    return row;
}

}  // namespace clidetail

inline int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis) {
    clidetail::StagePaths paths{cfg.out_dir};
    std::vector<clidetail::SweepPoint> points =
        clidetail::sweep_points(cfg, axis);
    std::vector<clidetail::SweepRow> rows(points.size());
    clidetail::parallel_for(points.size(), [&](std::size_t i) {
        rows[i] = clidetail::run_sweep_point(cfg, points[i]);
    });

    std::ostringstream csv;
    csv << "axis,point,delay_cycles,total_energy,edp,utilization,speedup,"
           "energy_efficiency\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        csv << buf;
    };
    for (const auto& row : rows) {
        csv << axis << "," << row.label << "," << row.delay << ",";
        put(row.energy);
        csv << ",";
        put(row.edp_value);
        csv << ",";
        put(row.util);
        csv << ",";
        // Speedup and efficiency are relative to the first axis point.
        put(static_cast<double>(rows.front().delay) /
            static_cast<double>(row.delay));
        csv << ",";
        put(rows.front().energy / row.energy);
        csv << "\n";
    }
    std::filesystem::create_directories(paths.root);
    write_text_file(paths.sweep_csv(axis).string(), csv.str());
    std::cout << "sweep[" << axis << "]: " << rows.size() << " points -> "
              << paths.sweep_csv(axis).string() << "\n";
    return 0;
}

// --- self-check suites ---------------------------------------------------------

namespace clidetail {

// Spiking element evaluation with the reset magnitude perturbed by one,
// mirroring the healthy path otherwise; the equivalence suite must catch it.
inline ActivationLevel faulty_snn_column_eval(const BitmapVector& a_row,
                                              const BitmapVector& w_col,
                                              const QuantConfig& cfg) {
    MatchList ml = inner_join(a_row.bits, w_col.bits);
    std::vector<SpikeTrain> trains;
    trains.reserve(ml.size());
    for (std::size_t i = 0; i < ml.size(); ++i)
        trains.push_back(
            spike_gen(ActivationLevel{a_row.values[ml.a_offsets[i]]}, cfg));
    MembraneState state;
    for (int t = 0; t < cfg.window; ++t) {
        std::int64_t gated = 0;
        for (std::size_t i = 0; i < ml.size(); ++i)
            if (trains[i].spike_at(t)) gated += w_col.values[ml.b_offsets[i]];
        state = spike_count_step(state, gated);
    }
    std::int64_t v = state.potential + cfg.step / 2;
    int emitted = 0;
    for (int i = 0; i < cfg.levels; ++i) {
        if (v >= cfg.step) {
            v -= cfg.step + 1;  // injected off-by-one reset
            ++emitted;
        }
    }
    return ActivationLevel{emitted};
}

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline std::string format_ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline BitmapVector row_fiber(const std::vector<std::int8_t>& dense) {
    return BitmapMatrix::from_dense(1, static_cast<std::uint32_t>(dense.size()),
                                    Layout::RowMajor, dense)
        .fibers[0];
}

inline BitmapVector col_fiber(const std::vector<std::int8_t>& dense) {
    return BitmapMatrix::from_dense(static_cast<std::uint32_t>(dense.size()), 1,
                                    Layout::ColMajor, dense)
        .fibers[0];
}

inline SuiteResult suite_equivalence(std::uint64_t seed, bool inject_fault) {
    auto spiking = [&](const BitmapVector& a, const BitmapVector& w,
                       const QuantConfig& cfg) {
        return inject_fault ? faulty_snn_column_eval(a, w, cfg)
                            : snn_column_eval(a, w, cfg);
    };
    long total = 0;
    long mismatches = 0;

    // Canned boundary element: the potential lands exactly on the top rail,
    // where an off-by-one reset magnitude starves later emissions.
    {
        QuantConfig cfg = QuantConfig::make(8, 16);
        BitmapVector a = row_fiber({8});
        BitmapVector w = col_fiber({2});
        ++total;
        if (!(spiking(a, w, cfg) == ann_column_eval(a, w, cfg))) ++mismatches;
    }

    // Randomized trials across the level grid.
    Rng rng = Rng::substream(seed, 0x6571756976ull);
    const int trials = 2000;
    const std::array<int, 3> level_grid{2, 4, 8};
    for (int t = 0; t < trials; ++t) {
        int levels = level_grid[rng.next_below(3)];
        int threshold =
            levels * static_cast<int>(rng.next_int(1, 127 / levels));
        QuantConfig cfg = QuantConfig::make(levels, threshold);
        std::size_t K = 1 + rng.next_below(256);
        double da = 0.1 + 0.8 * rng.next_double();
        double dw = 0.1 + 0.8 * rng.next_double();
        std::vector<std::int8_t> a(K, 0), w(K, 0);
        for (auto& v : a)
            if (rng.next_bool(da))
                v = static_cast<std::int8_t>(rng.next_int(1, levels));
        for (auto& v : w)
            if (rng.next_bool(dw)) {
                std::int64_t m = rng.next_int(1, 127);
                v = static_cast<std::int8_t>(rng.next_bool(0.5) ? m : -m);
            }
        BitmapVector arow = row_fiber(a);
        BitmapVector wcol = col_fiber(w);
        ++total;
        if (!(spiking(arow, wcol, cfg) == ann_column_eval(arow, wcol, cfg)))
            ++mismatches;
    }

    // Exhaustive small sweep at the coarsest quantizer: every activation
    // level pattern against every weight pattern from a signed grid, with
    // zero meaning the position is absent.
    {
        QuantConfig cfg = QuantConfig::make(2, 64);
        const std::array<int, 3> act_values{0, 1, 2};
        const std::array<int, 7> weight_values{-127, -64, -1, 0, 1, 64, 127};
        for (std::size_t K = 1; K <= 4; ++K) {
            std::vector<int> digit(2 * K, 0);
            for (;;) {
                std::vector<std::int8_t> a(K, 0), w(K, 0);
                for (std::size_t i = 0; i < K; ++i) {
                    a[i] = static_cast<std::int8_t>(
                        act_values[static_cast<std::size_t>(digit[i])]);
                    w[i] = static_cast<std::int8_t>(
                        weight_values[static_cast<std::size_t>(digit[K + i])]);
                }
                BitmapVector arow = row_fiber(a);
                BitmapVector wcol = col_fiber(w);
                ++total;
                if (!(spiking(arow, wcol, cfg) ==
                      ann_column_eval(arow, wcol, cfg)))
                    ++mismatches;
                std::size_t pos = 0;
                for (; pos < 2 * K; ++pos) {
                    int radix = pos < K ? 3 : 7;
                    if (++digit[pos] < radix) break;
                    digit[pos] = 0;
                }
                if (pos == 2 * K) break;
            }
        }
    }

    SuiteResult result;
    result.name = "equivalence";
    result.pass = mismatches == 0;
    result.detail = std::to_string(total) + " element evaluations, " +
                    std::to_string(mismatches) + " mismatches";
    return result;
}

inline SuiteResult suite_mask_invariance(std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0x6d61736bull);
    QuantConfig cfg = QuantConfig::make(8, 64);
    const std::size_t M = 16, K = 64, N = 16;
    int diffs = 0;
    for (int inst = 0; inst < 10; ++inst) {
        std::vector<std::int8_t> a(M * K, 0), w(K * N, 0);
        for (auto& v : a)
            if (rng.next_bool(0.5))
                v = static_cast<std::int8_t>(rng.next_int(1, cfg.levels));
        for (auto& v : w)
            if (rng.next_bool(0.5)) {
                std::int64_t m = rng.next_int(1, 127);
                v = static_cast<std::int8_t>(rng.next_bool(0.5) ? m : -m);
            }
        BitmapMatrix acts = BitmapMatrix::from_dense(M, K, Layout::RowMajor, a);
        BitmapMatrix weights =
            BitmapMatrix::from_dense(K, N, Layout::ColMajor, w);
        std::vector<std::int8_t> baseline =
            hybrid_gemm(acts, weights, ModeMask::uniform(N, Mode::Ann), cfg)
                .to_dense();
        for (int m = 0; m < 25; ++m) {
            ModeMask mask;
            mask.modes.resize(N);
            for (auto& mode : mask.modes)
                mode = rng.next_bool(0.5) ? Mode::Snn : Mode::Ann;
            if (hybrid_gemm(acts, weights, mask, cfg).to_dense() != baseline)
                ++diffs;
        }
    }
    SuiteResult result;
    result.name = "mask-invariance";
    result.pass = diffs == 0;
    result.detail = "10 instances x 25 masks, " + std::to_string(diffs) +
                    " outputs differed";
    return result;
}

inline CostParams random_cost_params(Rng& rng) {
    // Coefficient ratios spanning an order of magnitude across trials.
    auto coef = [&](double lo, double hi) {
        return lo * std::pow(hi / lo, rng.next_double());
    };
    CostParams p;
    p.ann.energy_per_match = coef(0.5, 5.0);
    p.ann.energy_per_column = coef(0.2, 2.0);
    p.ann.time_per_match = coef(0.5, 5.0);
    p.ann.time_per_column = coef(1.0, 10.0);
    p.ann.launch_time = coef(0.5, 5.0);
    p.ann.pes = 1 + static_cast<int>(rng.next_below(4));
    p.snn.energy_per_match = coef(0.1, 1.0);
    p.snn.energy_per_column = coef(0.2, 2.0);
    p.snn.time_per_match = coef(0.5, 5.0);
    p.snn.time_per_column = coef(2.0, 20.0);
    p.snn.launch_time = coef(0.5, 5.0);
    p.snn.pes = 1 + static_cast<int>(rng.next_below(4));
    p.lambda_weight = coef(0.25, 4.0);
    return p;
}

inline ColumnStats random_column_stats(Rng& rng, std::size_t n) {
    std::vector<double> matches;
    matches.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        matches.push_back(static_cast<double>(rng.next_int(0, 300)));
    return ColumnStats::from_matches(matches);
}

inline SuiteResult suite_phi_monotonicity(std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0x706869ull);
    int violations = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        CostParams p = random_cost_params(rng);
        std::size_t n = 2 + rng.next_below(199);
        ColumnStats stats = random_column_stats(rng, n);
        ScheduleResult r =
            schedule_cost(stats, p, pipeline_refine_options(stats.columns()));
        const std::vector<double>& traj = r.refine.phi_trajectory;
        for (std::size_t i = 0; i + 1 < traj.size(); ++i)
            if (traj[i + 1] >
                traj[i] + 1e-9 * std::max(1.0, std::abs(traj[i])))
                ++violations;
    }
    SuiteResult result;
    result.name = "phi-monotonicity";
    result.pass = violations == 0;
    result.detail = std::to_string(trials) + " refinement traces, " +
                    std::to_string(violations) + " increases";
    return result;
}

inline SuiteResult suite_oracle_proximity(std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0x6f7261636cull);
    const int trials = 100;
    int within = 0;
    double max_gap = 1.0;
    for (int t = 0; t < trials; ++t) {
        CostParams p = random_cost_params(rng);
        ColumnStats stats =
            random_column_stats(rng, 2 + rng.next_below(11));
        OracleResult oracle = brute_force_min_edp(stats, p);
        SweptSchedule sched = schedule_cost_swept(stats, p);
        double got = edp(sched.result.assignment, stats, sched.params);
        max_gap = std::max(max_gap, got / oracle.edp_value);
        if (got <= 1.05 * oracle.edp_value + 1e-12) ++within;
    }
    SuiteResult result;
    result.name = "oracle-proximity";
    result.pass = within >= 95;
    result.detail = std::to_string(within) + "/" + std::to_string(trials) +
                    " within 1.05x of the exhaustive oracle, max EDP gap " +
                    format_ratio(max_gap) + "x";
    return result;
}

}  // namespace clidetail

inline int cmd_verify(const ExperimentConfig& cfg, bool inject_fault) {
    std::vector<clidetail::SuiteResult> results;
    results.push_back(clidetail::suite_equivalence(cfg.seed, inject_fault));
    results.push_back(clidetail::suite_mask_invariance(cfg.seed));
    results.push_back(clidetail::suite_phi_monotonicity(cfg.seed));
    results.push_back(clidetail::suite_oracle_proximity(cfg.seed));

    int passed = 0;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail
                  << "\n";
        if (r.pass) ++passed;
    }
    std::cout << "verify: " << passed << "/" << results.size()
              << " suites passed\n";
    return passed == static_cast<int>(results.size()) ? 0 : 3;
}

// --- entry point ---------------------------------------------------------------

inline int cli_main(int argc, char** argv) {
    CLI::App app{
        "Offline toolchain for the hybrid dual-sparse accelerator: generate "
        "operands, profile, calibrate, schedule, simulate, sweep, verify."};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string strategy_override;
    std::string axis;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool inject_fault = false;

    auto* opt_config =
        app.add_option("--config", config_path, "Experiment config JSON file");
    auto* opt_strategy = app.add_option(
        "--strategy", strategy_override,
        "Schedule strategy override (cost, random, ann-only, snn-only, "
        "oracle, layerwise-<k>)");
    auto* opt_seed =
        app.add_option("--seed", seed_override, "Seed override");
    auto* opt_axis = app.add_option(
        "--axis", axis, "Sweep axis: sparsity, quant_pair, core_split");
    auto* opt_out =
        app.add_option("--out", out_override, "Output directory override");
    app.add_flag("--inject-fault", inject_fault,
                 "Perturb the spiking reset so the equivalence suite fails");

    auto* sub_gen = app.add_subcommand("gen", "Generate operand matrices");
    auto* sub_profile =
        app.add_subcommand("profile", "Collect per-column match statistics");
    auto* sub_calibrate = app.add_subcommand(
        "calibrate", "Fit cost parameters from single-column microbenchmarks");
    auto* sub_schedule =
        app.add_subcommand("schedule", "Produce schedule artifacts");
    auto* sub_simulate = app.add_subcommand(
        "simulate", "Run the cycle model over the scheduled layers");
    auto* sub_sweep = app.add_subcommand("sweep", "Run one figure sweep axis");
    auto* sub_verify =
        app.add_subcommand("verify", "Run the self-check suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg;
        if (opt_config->count() > 0) {
            cfg = load_experiment_config(config_path);
        } else if (sub_verify->parsed()) {
            cfg.networks = reference_suite();  // the suites only use the seed
        } else {
            throw ConfigError("--config is required for this command");
        }
        if (opt_seed->count() > 0) cfg.seed = seed_override;
        if (opt_out->count() > 0) cfg.out_dir = out_override;

        std::vector<std::string> strategies = cfg.strategies;
        if (opt_strategy->count() > 0) strategies = {strategy_override};
        for (const auto& s : strategies) parse_strategy(s);

        if (sub_gen->parsed()) return cmd_gen(cfg);
        if (sub_profile->parsed()) return cmd_profile(cfg);
        if (sub_calibrate->parsed()) return cmd_calibrate(cfg);
        if (sub_schedule->parsed()) return cmd_schedule(cfg, strategies);
        if (sub_simulate->parsed()) return cmd_simulate(cfg, strategies);
        if (sub_sweep->parsed()) {
            if (opt_axis->count() == 0)
                throw ConfigError("sweep requires --axis");
            return cmd_sweep(cfg, axis);
        }
        if (sub_verify->parsed()) return cmd_verify(cfg, inject_fault);
        throw ConfigError("no command selected");
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace neuroflex
