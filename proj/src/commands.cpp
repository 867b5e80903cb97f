#include "tradegraph/commands.hpp"

#include "tradegraph/csv.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef TRADEGRAPH_VERSION
#define TRADEGRAPH_VERSION "0.0.0"
#endif

namespace tradegraph {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kCommands{"synth", "build-graph", "single", "sequence", "report"};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::vector<std::string> inputs;
    fs::path output;
    std::uint64_t seed = 0;
    std::string started_at, finished_at, status;

    Json to_json() const {
        Json j;
        j["command"] = command;
        j["tool_version"] = TRADEGRAPH_VERSION;
        j["config"] = Json(config);
        j["inputs"] = inputs;
        j["output"] = output.string();
        j["seed"] = seed;
        j["started_at"] = started_at;
        j["finished_at"] = finished_at.empty() ? Json(nullptr) : Json(finished_at);
        j["status"] = status;
        return j;
    }
    void write() const { write_text(output / "manifest.json", to_json().dump(2) + "\n"); }
};

/// The regions a data-consuming command works on, with their ids.
struct Regions {
    std::vector<Dataset> datasets;
    std::vector<int> ids;
};

Regions load_regions(const RunConfig& cfg, std::ostream& log) {
    Regions r;
    if (cfg.data.empty()) {
        r.datasets = generate_synthetic(cfg.synth);
        log << "synthesized " << r.datasets.size() << " regions\n";
    } else {
        for (const auto& p : cfg.data) {
            r.datasets.push_back(parse_transactions_csv(p));
            log << "loaded " << r.datasets.back().size() << " transactions from " << p.string() << "\n";
        }
    }
    if (!cfg.region_ids.empty()) {
        if (cfg.region_ids.size() != r.datasets.size())
            throw ConfigError("region_ids", "needs one id per region (" + std::to_string(r.datasets.size()) + ")");
        r.ids = cfg.region_ids;
    } else {
        for (std::size_t k = 0; k < r.datasets.size(); ++k) r.ids.push_back(static_cast<int>(k + 1));
    }
    return r;
}

void write_history(const fs::path& path, const TrainHistory& h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    csv::write_record(out, {"epoch", "loss", "data_loss", h.monitor});
    for (const auto& e : h.epochs)
        csv::write_record(out, {std::to_string(e.epoch), csv::format_double(e.loss), csv::format_double(e.data_loss),
                                csv::format_double(e.monitor)});
}

std::string percent(const std::optional<double>& v) {
    if (!v) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * *v;
    return os.str();
}

// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const auto regions = generate_synthetic(cfg.synth);
    for (std::size_t k = 0; k < regions.size(); ++k) {
        const std::string name = "region_" + std::to_string(k + 1);
        write_transactions_csv(out / (name + ".csv"), regions[k]);
        std::ofstream prof(out / ("temporal_profile_" + name + ".csv"), std::ios::binary);
        write_temporal_profile_csv(prof, emit_temporal_profile(regions[k]));
        log << "wrote " << (out / (name + ".csv")).string() << " (" << regions[k].size() << " transactions)\n";
    }
}

void cmd_build_graph(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const Regions regions = load_regions(cfg, log);
    const auto specs = cfg.train.metapath_specs();
    Json summary = Json::array();
    for (std::size_t k = 0; k < regions.datasets.size(); ++k) {
        const HeteroTradeGraph g = build_htg(regions.datasets[k]);
        const fs::path dir = out / ("graph_region_" + std::to_string(regions.ids[k]));
        save_graph(dir, g);
        Json entry;
        entry["region_id"] = regions.ids[k];
        entry["transactions"] = g.num_transactions();
        entry["card_holders"] = g.card_holders.size();
        entry["merchants"] = g.merchants.size();
        entry["time_slices"] = g.time_slices.size();
        Json paths;
        for (const auto& adj : extract_metapaths(g, specs)) paths[adj.spec.name] = adj.num_pairs();
        entry["metapath_pairs"] = std::move(paths);
        summary.push_back(std::move(entry));
        log << "wrote " << dir.string() << "\n";
    }
    write_text(out / "graph_summary.json", summary.dump(2) + "\n");
}

void cmd_single(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const Regions regions = load_regions(cfg, log);
    const RegionTask task = prepare_region(regions.ids[0], regions.datasets[0], cfg.train);
    const ModelParams init = ModelParams::init(cfg.train.model, task.graph.feature_width(), task.adjacencies.size(),
                                               derive_seed(cfg.train.seed, "init"));
    TrainResult tr = train_region(task, init, cfg.train);
    const Evaluation e = evaluate_nodes(task, tr.params, task.test, cfg.train);

    MetricsReport report;
    report.command = "single";
    report.config = cfg.train;
    report.regions.push_back({task.region_id, e});
    report.curves.push_back({1, task.region_id, e});
    report.histories.push_back(tr.history);
    write_text(out / "metrics.json", report_to_json(report));
    write_text(out / "timings.json", timings_to_json(report));
    write_history(out / "history.csv", tr.history);
    save_params(out / "theta_task1.ckpt", tr.params);
    log << "region " << task.region_id << ": recall " << percent(e.recall) << "  auc " << percent(e.auc) << "  f1 "
        << percent(e.f1) << "  (" << tr.history.epochs.size() << " epochs)\n";
}

void cmd_sequence(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const Regions regions = load_regions(cfg, log);
    SequenceResult res = run_sequence(regions.datasets, regions.ids, cfg.train);
    res.report.command = "sequence";
    write_text(out / "metrics.json", report_to_json(res.report));
    write_text(out / "timings.json", timings_to_json(res.report));
    {
        std::ofstream curves(out / "forgetting_curves.csv", std::ios::binary);
        emit_forgetting_curves(curves, res.report);
    }
    for (std::size_t t = 0; t < res.task_params.size(); ++t) {
        const std::string l = std::to_string(t + 1);
        save_params(out / ("theta_task" + l + ".ckpt"), res.task_params[t]);
        write_history(out / ("history_task" + l + ".csv"), res.report.histories[t]);
    }
    for (std::size_t t = 0; t < res.fisher.size(); ++t) {
        const std::string l = std::to_string(t + 1);
        if (uses_smoothing(cfg.train.variant)) save_fisher(out / ("fisher_task" + l + ".ckpt"), res.fisher[t]);
        if (!res.replay[t].samples.empty()) {
            write_replay_samples(out / ("replay_task" + l), res.replay[t].samples);
            write_replay_samples(out / ("twins_task" + l), res.twins[t]);
        }
    }
    for (const auto& r : res.report.regions)
        log << "region " << r.region_id << ": recall " << percent(r.metrics.recall) << "  auc "
            << percent(r.metrics.auc) << "  f1 " << percent(r.metrics.f1) << "\n";
    log << "average: recall " << percent(res.report.average_recall()) << "  auc " << percent(res.report.average_auc())
        << "  f1 " << percent(res.report.average_f1()) << "\n";
}

void cmd_report(const std::vector<fs::path>& dirs, const fs::path& out, std::ostream& log) {
    if (dirs.empty()) throw ConfigError("runs", "report needs at least one run directory");
    std::ostringstream table;
    csv::write_record(table, {"run", "command", "variant", "seed", "recall", "auc", "f1"});
    for (const auto& dir : dirs) {
        const Json j = read_json(dir / "metrics.json");
        const Json& avg = j.at("average");
        auto num = [](const Json& v) { return v.is_null() ? std::string() : csv::format_double(v.get<double>()); };
        csv::write_record(table, {dir.string(), j.at("command").get<std::string>(), j.at("variant").get<std::string>(),
                                  std::to_string(j.at("seed").get<std::uint64_t>()), num(avg.at("recall")),
                                  num(avg.at("auc")), num(avg.at("f1"))});
        log << dir.string() << "  " << j.at("variant").get<std::string>() << "  recall "
            << percent(avg.at("recall").get<double>()) << "  auc "
            << percent(avg.at("auc").is_null() ? std::nullopt : std::optional<double>(avg.at("auc").get<double>()))
            << "  f1 " << percent(avg.at("f1").get<double>()) << "\n";
    }
    write_text(out / "report.csv", table.str());
}

} // namespace

fs::path resolve_output_dir(const std::string& configured, const std::string& command) {
    fs::path p = configured.empty() ? fs::path("runs") / command : fs::path(configured);
    if (p.is_relative()) {
        if (const char* root = std::getenv(kOutputRootEnv); root && *root) p = fs::path(root) / p;
    }
    return fs::absolute(p).lexically_normal();
}

fs::path run_command(const CommandOptions& opt, std::ostream& log) {
    ConfigFile file;
    std::string command = opt.command;
    fs::path manifest_output;
    if (opt.manifest) {
        const Json m = read_json(*opt.manifest);
        const std::string recorded = m.at("command").get<std::string>();
        if (!command.empty() && command != recorded)
            throw ConfigError("command", "manifest records '" + recorded + "', not '" + command + "'");
        command = recorded;
        for (const auto& [k, v] : m.at("config").items()) file.set(k, v.get<std::string>());
        manifest_output = m.at("output").get<std::string>();
    } else if (opt.config) {
        file = ConfigFile::load(*opt.config);
    }
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
        throw ConfigError("command", "unknown command '" + command + "'");
    for (const auto& [k, v] : opt.overrides) file.set(k, v);

    RunConfig cfg = resolve_config(file);
    for (auto& p : cfg.data) p = fs::absolute(p).lexically_normal();

    fs::path out;
    if (opt.manifest && !opt.overrides.count("out"))
        out = manifest_output;
    else
        out = resolve_output_dir(cfg.out, command);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());

    Manifest manifest;
    manifest.command = command;
    manifest.config = cfg.resolved();
    for (const auto& p : cfg.data) manifest.inputs.push_back(p.string());
    for (const auto& d : opt.run_dirs) manifest.inputs.push_back(fs::absolute(d).lexically_normal().string());
    manifest.output = out;
    manifest.seed = cfg.train.seed;
    manifest.started_at = utc_now();
    manifest.status = "running";
    manifest.write();

    if (command == "synth")
        cmd_synth(cfg, out, log);
    else if (command == "build-graph")
        cmd_build_graph(cfg, out, log);
    else if (command == "single")
        cmd_single(cfg, out, log);
    else if (command == "sequence")
        cmd_sequence(cfg, out, log);
    else {
        std::vector<fs::path> dirs = opt.run_dirs;
        if (dirs.empty())
            for (const auto& s : manifest.inputs) dirs.emplace_back(s);
        cmd_report(dirs, out, log);
    }

    manifest.finished_at = utc_now();
    manifest.status = "completed";
    manifest.write();
    return out;
}

} // namespace tradegraph
