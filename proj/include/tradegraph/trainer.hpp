#pragma once

#include "tradegraph/continual.hpp"
#include "tradegraph/data.hpp"
#include "tradegraph/htg.hpp"
#include "tradegraph/metrics.hpp"
#include "tradegraph/model.hpp"
#include "tradegraph/optimizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tradegraph {

/// Which forgetting-prevention components run between regions.
enum class Variant { full, no_rps, no_pkr, naive };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);
bool uses_replay(Variant v);
bool uses_smoothing(Variant v);

struct TrainConfig {
    double learning_rate = 0.05;
    double weight_decay = 0.001;
    int max_epochs = 200;
    int patience = 20;
    std::uint64_t seed = 7;
    double replay_ratio = 0.15;
    double lambda = 1.5;
    double gamma = 0.00025;
    double sigma_scale = 0.1;
    Variant variant = Variant::full;
    double threshold = 0.5;
    SplitRatios split;
    Hyperparams model;
    std::vector<std::string> metapaths{"TCT", "TMT", "TST"};
    Policy policy = Policy::parallel;

    void validate() const;
    std::vector<MetaPathSpec> metapath_specs() const;
};

/// One region's transductive graph. Nodes are laid out train, val, test; only
/// `train` contributes to the loss.
struct RegionTask {
    int region_id = 0;
    HeteroTradeGraph graph;
    std::vector<MetaPathAdjacency> adjacencies;
    std::vector<int> train, val, test;

    GraphInput input() const { return GraphInput{graph.features, adjacencies}; }
};

RegionTask prepare_region(int region_id, const Dataset& ds, const TrainConfig& cfg);

/// The task with extra labelled samples appended to its graph and training set.
RegionTask with_replay(const RegionTask& task, std::span<const ReplaySample> samples, const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;      // objective before the step
    double data_loss = 0.0; // cross-entropy part
    double monitor = 0.0;   // early-stopping value after the step
    double seconds = 0.0;
};

struct TrainHistory {
    std::string monitor; // "val_auc", "neg_val_loss" or "neg_train_loss"
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_monitor = 0.0;
};

struct TrainResult {
    ModelParams params; // best by the monitor
    TrainHistory history;
    OptimizerState optimizer; // Adam moments at the best epoch
};

/// Full-graph Adam on cross-entropy plus the smoothing loss when `state` is given.
/// Stops once the monitor has not improved for `patience` epochs. Adam starts from
/// `resume` when given (the sequence carries it from task to task), else from zero moments.
TrainResult train_region(const RegionTask& task, const ModelParams& init, const TrainConfig& cfg,
                         const FisherState* state = nullptr, const OptimizerState* resume = nullptr);

/// Metrics of `params` on the given nodes of a task.
Evaluation evaluate_nodes(const RegionTask& task, const ModelParams& params, std::span<const int> nodes,
                          const TrainConfig& cfg);

struct RegionMetrics {
    int region_id = 0;
    Evaluation metrics;
};

struct CurvePoint {
    int task_index = 0; // 1-based
    int region_id = 0;
    Evaluation metrics;
};

struct MetricsReport {
    std::string command;
    TrainConfig config;
    std::vector<RegionMetrics> regions; // final model on every region's test set
    std::vector<CurvePoint> curves;     // every seen region after every task
    std::vector<TrainHistory> histories;

    double average_recall() const;
    double average_f1() const;
    /// Mean over regions where AUC is defined; nullopt when none is.
    std::optional<double> average_auc() const;
};

struct SequenceResult {
    MetricsReport report;
    std::vector<ModelParams> task_params;   // after each task
    std::vector<FisherState> fisher;        // entry l built at the end of task l (1-based l < n)
    std::vector<ReplayBuffer> replay;       // same indexing as fisher; empty when unused
    std::vector<std::vector<ReplaySample>> twins;
};

SequenceResult run_sequence(std::span<const Dataset> regions, std::span<const int> region_ids, const TrainConfig& cfg);

/// AUC per (task, seen region), n(n+1)/2 rows for n tasks. Header task_index,region_id,auc.
void emit_forgetting_curves(std::ostream& out, const MetricsReport& report);

/// Deterministic JSON text of the report (no wall-clock values).
std::string report_to_json(const MetricsReport& report);
/// Per-epoch wall-clock seconds.
std::string timings_to_json(const MetricsReport& report);

} // namespace tradegraph
