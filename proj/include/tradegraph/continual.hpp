#pragma once

#include "tradegraph/htg.hpp"
#include "tradegraph/model.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tradegraph {

/// Labelled transactions carried over from the previous region.
struct ReplayBuffer {
    int source_region = 0;
    double ratio = 0.0;
    std::vector<ReplaySample> samples;
};

/// Draws round(ratio * |pool|) of the pool's transactions uniformly without replacement.
/// Samples keep the pool's node order.
ReplayBuffer sample_replay_buffer(const HeteroTradeGraph& g, std::span<const int> pool, int source_region, double ratio,
                                  std::uint64_t seed);

struct ClassPrototype {
    int label = 0;
    std::size_t count = 0;
    std::vector<double> mean;
    std::vector<double> sigma;
};

struct PrototypeSet {
    std::vector<ClassPrototype> classes; // sorted by label
    std::vector<ReplaySample> twins;     // one per buffer sample, same order
    std::vector<std::string> warnings;

    const ClassPrototype* find(int label) const;
};

/// Per-class mean and scaled population std of the buffer features; each sample gets a
/// twin drawn from Normal(mean, sigma^2) of its class, keeping its label and entity ids.
PrototypeSet generate_prototypes(const ReplayBuffer& buffer, double sigma_scale, std::uint64_t seed);

struct FisherState {
    ModelParams fisher; // diagonal, >= 0
    ModelParams anchor; // parameters at the end of the previous task
    double lambda = 1.5;
    double gamma = 0.00025;
};

/// Mean over `nodes` of the elementwise squared per-node loss gradient. `loss_scale`
/// multiplies each per-node loss before differentiation.
ModelParams compute_fisher(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                           std::span<const int> labels, std::span<const int> nodes, Policy policy = Policy::parallel,
                           double loss_scale = 1.0);

/// (lambda/2) sum F (theta - anchor)^2 + gamma (||theta||_2 + ||anchor||_2)
double smoothing_loss(const ModelParams& params, const FisherState& state);

/// The smoothing penalty as an extra term of the training objective.
class SmoothingLoss final : public LossTerm {
public:
    explicit SmoothingLoss(const FisherState& state);
    double value(const ModelParams& params) const override;
    void add_gradient(const ModelParams& params, ModelParams& grad) const override;

private:
    const FisherState& state_;
};

/// Cross-entropy over `labeled` plus the smoothing loss when a state is given.
double total_objective(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                       std::span<const int> labels, std::span<const int> labeled, const FisherState* state,
                       Policy policy = Policy::parallel);

// ---------------------------------------------------------------------------
// Checkpoints

void save_fisher(const std::filesystem::path& path, const FisherState& state);
FisherState load_fisher(const std::filesystem::path& path);

/// `<prefix>_features.csv` (txn_id, f0..) and `<prefix>_entities.csv`
/// (txn_id, card_holder_id, merchant_id, time_slice, label).
void write_replay_samples(const std::filesystem::path& prefix, std::span<const ReplaySample> samples);
std::vector<ReplaySample> read_replay_samples(const std::filesystem::path& prefix);

} // namespace tradegraph
