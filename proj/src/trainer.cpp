#include "tradegraph/trainer.hpp"

#include "tradegraph/csv.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ostream>

namespace tradegraph {

using Json = nlohmann::ordered_json;

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::full: return "full";
    case Variant::no_rps: return "no_rps";
    case Variant::no_pkr: return "no_pkr";
    case Variant::naive: return "naive";
    }
    return "?";
}

Variant variant_from_string(std::string_view name) {
    if (name == "full") return Variant::full;
    if (name == "no_rps") return Variant::no_rps;
    if (name == "no_pkr") return Variant::no_pkr;
    if (name == "naive") return Variant::naive;
    throw ConfigError("variant", "unknown variant '" + std::string(name) + "' (full, no_rps, no_pkr, naive)");
}

bool uses_replay(Variant v) { return v == Variant::full || v == Variant::no_rps; }
bool uses_smoothing(Variant v) { return v == Variant::full || v == Variant::no_pkr; }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay", "must be >= 0");
    if (max_epochs < 1) throw ConfigError("max_epochs", "must be at least 1");
    if (patience < 0) throw ConfigError("patience", "must be >= 0");
    if (patience > max_epochs) throw ConfigError("patience", "must not exceed max_epochs");
    if (!(replay_ratio >= 0.0 && replay_ratio <= 1.0)) throw ConfigError("replay_ratio", "must lie in [0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be >= 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma", "must be >= 0");
    if (!(sigma_scale >= 0.0) || !std::isfinite(sigma_scale)) throw ConfigError("sigma_scale", "must be >= 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold", "must lie in [0, 1]");
    if (metapaths.empty()) throw ConfigError("metapaths", "at least one meta-path is required");
    model.validate();
    metapath_specs();
}

std::vector<MetaPathSpec> TrainConfig::metapath_specs() const {
    std::vector<MetaPathSpec> specs;
    for (const auto& name : metapaths) {
        try {
            specs.push_back(MetaPathSpec::from_name(name));
        } catch (const Error& e) {
            throw ConfigError("metapaths", e.what());
        }
    }
    return specs;
}

// ---------------------------------------------------------------------------
// Tasks

RegionTask prepare_region(int region_id, const Dataset& ds, const TrainConfig& cfg) {
    if (ds.empty()) throw Error("region " + std::to_string(region_id) + " has no transactions");
    const DatasetSplit split = split_train_val_test(ds, cfg.split, derive_seed(cfg.seed, "split/" + std::to_string(region_id)));
    Dataset all;
    all.provenance = ds.provenance;
    all.seed = ds.seed;
    for (const Dataset* part : {&split.train, &split.val, &split.test})
        all.records.insert(all.records.end(), part->records.begin(), part->records.end());

    RegionTask t;
    t.region_id = region_id;
    t.graph = build_htg(all);
    const auto specs = cfg.metapath_specs();
    t.adjacencies = extract_metapaths(t.graph, specs);
    int node = 0;
    for (std::size_t i = 0; i < split.train.size(); ++i) t.train.push_back(node++);
    for (std::size_t i = 0; i < split.val.size(); ++i) t.val.push_back(node++);
    for (std::size_t i = 0; i < split.test.size(); ++i) t.test.push_back(node++);
    return t;
}

RegionTask with_replay(const RegionTask& task, std::span<const ReplaySample> samples, const TrainConfig& cfg) {
    RegionTask t;
    t.region_id = task.region_id;
    t.graph = merge_replay_into_htg(task.graph, samples);
    const auto specs = cfg.metapath_specs();
    t.adjacencies = extract_metapaths(t.graph, specs);
    t.train = task.train;
    t.val = task.val;
    t.test = task.test;
    for (std::size_t k = 0; k < samples.size(); ++k)
        t.train.push_back(static_cast<int>(task.graph.num_transactions() + k));
    return t;
}

// ---------------------------------------------------------------------------
// Training

namespace {

double mean_loss(const Vector& predictions, const std::vector<int>& labels, std::span<const int> nodes) {
    std::vector<double> p;
    std::vector<int> y;
    p.reserve(nodes.size());
    y.reserve(nodes.size());
    for (int i : nodes) {
        p.push_back(predictions(i));
        y.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return cross_entropy_loss(p, y);
}

bool has_both_classes(const std::vector<int>& labels, std::span<const int> nodes) {
    bool pos = false, neg = false;
    for (int i : nodes) (labels[static_cast<std::size_t>(i)] == 1 ? pos : neg) = true;
    return pos && neg;
}

Evaluation evaluate_predictions(const Vector& predictions, const std::vector<int>& labels, std::span<const int> nodes,
                                double threshold) {
    std::vector<double> p;
    std::vector<int> y;
    for (int i : nodes) {
        p.push_back(predictions(i));
        y.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return evaluate(p, y, threshold);
}

} // namespace

TrainResult train_region(const RegionTask& task, const ModelParams& init, const TrainConfig& cfg,
                         const FisherState* state, const OptimizerState* resume) {
    cfg.validate();
    if (task.train.empty()) throw Error("region " + std::to_string(task.region_id) + " has no training nodes");
    const GraphInput input = task.input();
    const auto& labels = task.graph.labels;

    TrainHistory history;
    if (has_both_classes(labels, task.val))
        history.monitor = "val_auc";
    else if (!task.val.empty())
        history.monitor = "neg_val_loss";
    else
        history.monitor = "neg_train_loss";

    auto monitor_of = [&](const ForwardTrace& t) {
        if (history.monitor == "val_auc") {
            std::vector<double> p;
            std::vector<int> y;
            for (int i : task.val) {
                p.push_back(t.predictions(i));
                y.push_back(labels[static_cast<std::size_t>(i)]);
            }
            return roc_auc(p, y);
        }
        if (history.monitor == "neg_val_loss") return -mean_loss(t.predictions, labels, task.val);
        return -mean_loss(t.predictions, labels, task.train);
    };

    std::optional<SmoothingLoss> smoothing;
    std::vector<const LossTerm*> extra;
    if (state) {
        smoothing.emplace(*state);
        extra.push_back(&*smoothing);
    }

    ModelParams params = init;
    ModelParams best = init;
    OptimizerState opt = resume ? *resume : OptimizerState::for_params(params);
    if (resume && !(opt.m.same_layout(params) && opt.v.same_layout(params)))
        throw DimensionError("optimizer state does not match the parameters");
    OptimizerState best_opt = opt;
    ForwardTrace trace = forward(input, params, cfg.model, cfg.policy);
    int since_best = 0;
    bool have_best = false;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const GradientResult g =
            compute_gradients(input, params, cfg.model, trace, labels, task.train, extra, cfg.policy);
        optimizer_step(params, g.grad, opt, cfg.learning_rate, cfg.weight_decay);
        trace = forward(input, params, cfg.model, cfg.policy);
        const double monitor = monitor_of(trace);
        const auto stop = std::chrono::steady_clock::now();

        history.epochs.push_back({epoch, g.loss, g.data_loss, monitor, std::chrono::duration<double>(stop - start).count()});
        if (!have_best || monitor > history.best_monitor) {
            have_best = true;
            history.best_monitor = monitor;
            history.best_epoch = epoch;
            best = params;
            best_opt = opt;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) break;
    }
    return {std::move(best), std::move(history), std::move(best_opt)};
}

Evaluation evaluate_nodes(const RegionTask& task, const ModelParams& params, std::span<const int> nodes,
                          const TrainConfig& cfg) {
    const ForwardTrace t = forward(task.input(), params, cfg.model, cfg.policy);
    return evaluate_predictions(t.predictions, task.graph.labels, nodes, cfg.threshold);
}

// ---------------------------------------------------------------------------
// Sequence

double MetricsReport::average_recall() const {
    double s = 0.0;
    for (const auto& r : regions) s += r.metrics.recall;
    return regions.empty() ? 0.0 : s / static_cast<double>(regions.size());
}

double MetricsReport::average_f1() const {
    double s = 0.0;
    for (const auto& r : regions) s += r.metrics.f1;
    return regions.empty() ? 0.0 : s / static_cast<double>(regions.size());
}

std::optional<double> MetricsReport::average_auc() const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : regions)
        if (r.metrics.auc) {
            s += *r.metrics.auc;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return s / n;
}

SequenceResult run_sequence(std::span<const Dataset> regions, std::span<const int> region_ids, const TrainConfig& cfg) {
    cfg.validate();
    if (regions.empty()) throw Error("a sequence needs at least one region");
    if (regions.size() != region_ids.size()) throw DimensionError("one region id per dataset is required");

    std::vector<RegionTask> tasks;
    tasks.reserve(regions.size());
    for (std::size_t r = 0; r < regions.size(); ++r) tasks.push_back(prepare_region(region_ids[r], regions[r], cfg));

    SequenceResult out;
    out.report.config = cfg;
    ModelParams params = ModelParams::init(cfg.model, tasks[0].graph.feature_width(), tasks[0].adjacencies.size(),
                                           derive_seed(cfg.seed, "init"));
    OptimizerState optimizer;

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const std::string tag = "task" + std::to_string(t + 1);
        const FisherState* state = nullptr;
        std::optional<RegionTask> merged;
        if (t > 0) {
            const RegionTask& prev = tasks[t - 1];
            FisherState fs;
            ReplayBuffer buffer;
            std::vector<ReplaySample> twins;
            if (uses_smoothing(cfg.variant)) {
                fs.fisher = compute_fisher(prev.input(), params, cfg.model, prev.graph.labels, prev.train, cfg.policy);
                fs.anchor = params;
                fs.lambda = cfg.lambda;
                fs.gamma = cfg.gamma;
            }
            if (uses_replay(cfg.variant) && cfg.replay_ratio > 0.0) {
                buffer = sample_replay_buffer(prev.graph, prev.train, prev.region_id, cfg.replay_ratio,
                                              derive_seed(cfg.seed, "replay/" + tag));
                if (!buffer.samples.empty()) {
                    twins = generate_prototypes(buffer, cfg.sigma_scale, derive_seed(cfg.seed, "twins/" + tag)).twins;
                    std::vector<ReplaySample> extra = buffer.samples;
                    extra.insert(extra.end(), twins.begin(), twins.end());
                    merged = with_replay(tasks[t], extra, cfg);
                }
            }
            out.fisher.push_back(std::move(fs));
            out.replay.push_back(std::move(buffer));
            out.twins.push_back(std::move(twins));
            if (uses_smoothing(cfg.variant)) state = &out.fisher.back();
        }

        TrainResult tr = train_region(merged ? *merged : tasks[t], params, cfg, state, t > 0 ? &optimizer : nullptr);
        params = std::move(tr.params);
        optimizer = std::move(tr.optimizer);
        out.report.histories.push_back(std::move(tr.history));
        out.task_params.push_back(params);

        for (std::size_t s = 0; s <= t; ++s)
            out.report.curves.push_back(
                {static_cast<int>(t + 1), tasks[s].region_id, evaluate_nodes(tasks[s], params, tasks[s].test, cfg)});
    }
    for (const auto& c : out.report.curves)
        if (c.task_index == static_cast<int>(tasks.size())) out.report.regions.push_back({c.region_id, c.metrics});
    return out;
}

void emit_forgetting_curves(std::ostream& out, const MetricsReport& report) {
    csv::write_record(out, {"task_index", "region_id", "auc"});
    for (const auto& c : report.curves)
        csv::write_record(out, {std::to_string(c.task_index), std::to_string(c.region_id),
                                c.metrics.auc ? csv::format_double(*c.metrics.auc) : std::string()});
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json metrics_json(const Evaluation& e) {
    Json j;
    j["recall"] = e.recall;
    j["precision"] = e.precision;
    j["f1"] = e.f1;
    j["auc"] = e.auc ? Json(*e.auc) : Json(nullptr);
    return j;
}

Json config_json(const TrainConfig& c) {
    Json j;
    j["learning_rate"] = c.learning_rate;
    j["weight_decay"] = c.weight_decay;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["seed"] = c.seed;
    j["replay_ratio"] = c.replay_ratio;
    j["lambda"] = c.lambda;
    j["gamma"] = c.gamma;
    j["sigma_scale"] = c.sigma_scale;
    j["variant"] = std::string(to_string(c.variant));
    j["threshold"] = c.threshold;
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
    j["hidden"] = c.model.hidden;
    j["heads"] = c.model.heads;
    j["semantic"] = c.model.semantic;
    j["leaky_slope"] = c.model.leaky_slope;
    j["activation"] = std::string(to_string(c.model.activation));
    j["metapaths"] = c.metapaths;
    return j;
}

} // namespace

std::string report_to_json(const MetricsReport& r) {
    Json j;
    j["command"] = r.command;
    j["seed"] = r.config.seed;
    j["variant"] = std::string(to_string(r.config.variant));
    j["config"] = config_json(r.config);
    Json regions = Json::array();
    for (const auto& m : r.regions) {
        Json e = metrics_json(m.metrics);
        e["region_id"] = m.region_id;
        regions.push_back(std::move(e));
    }
    j["regions"] = std::move(regions);
    Json avg;
    avg["recall"] = r.average_recall();
    avg["f1"] = r.average_f1();
    const auto auc = r.average_auc();
    avg["auc"] = auc ? Json(*auc) : Json(nullptr);
    j["average"] = std::move(avg);
    Json curves = Json::array();
    for (const auto& c : r.curves) {
        Json e = metrics_json(c.metrics);
        e["task_index"] = c.task_index;
        e["region_id"] = c.region_id;
        curves.push_back(std::move(e));
    }
    j["checkpoints"] = std::move(curves);
    Json training = Json::array();
    for (const auto& h : r.histories) {
        Json e;
        e["monitor"] = h.monitor;
        e["epochs"] = h.epochs.size();
        e["best_epoch"] = h.best_epoch;
        e["best_monitor"] = h.best_monitor;
        e["final_loss"] = h.epochs.empty() ? 0.0 : h.epochs.back().loss;
        training.push_back(std::move(e));
    }
    j["training"] = std::move(training);
    return j.dump(2) + "\n";
}

std::string timings_to_json(const MetricsReport& r) {
    Json tasks = Json::array();
    for (const auto& h : r.histories) {
        Json secs = Json::array();
        double total = 0.0;
        for (const auto& e : h.epochs) {
            secs.push_back(e.seconds);
            total += e.seconds;
        }
        tasks.push_back({{"epoch_seconds", std::move(secs)}, {"total_seconds", total}});
    }
    Json j;
    j["tasks"] = std::move(tasks);
    return j.dump(2) + "\n";
}

} // namespace tradegraph
