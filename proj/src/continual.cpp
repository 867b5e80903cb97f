#include "tradegraph/continual.hpp"

#include "tradegraph/csv.hpp"
#include "tradegraph/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace tradegraph {

// ---------------------------------------------------------------------------
// Replay buffer

ReplayBuffer sample_replay_buffer(const HeteroTradeGraph& g, std::span<const int> pool, int source_region, double ratio,
                                  std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("replay_ratio", "must lie in (0, 1]");
    if (pool.empty()) throw Error("cannot sample a replay buffer from an empty region");
    const std::size_t n = pool.size();
    const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < k; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, n - 1);
        std::swap(idx[t], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    ReplayBuffer buf;
    buf.source_region = source_region;
    buf.ratio = ratio;
    buf.samples.reserve(k);
    for (std::size_t t : idx) {
        const int node = pool[t];
        if (node < 0 || static_cast<std::size_t>(node) >= g.num_transactions())
            throw DimensionError("replay pool index out of range");
        buf.samples.push_back(replay_sample_of(g, static_cast<std::size_t>(node)));
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Prototypes

const ClassPrototype* PrototypeSet::find(int label) const {
    for (const auto& c : classes)
        if (c.label == label) return &c;
    return nullptr;
}

PrototypeSet generate_prototypes(const ReplayBuffer& buffer, double sigma_scale, std::uint64_t seed) {
    if (buffer.samples.empty()) throw Error("cannot build prototypes from an empty buffer");
    if (!(sigma_scale >= 0.0) || !std::isfinite(sigma_scale)) throw ConfigError("sigma_scale", "must be a finite value >= 0");
    const std::size_t width = buffer.samples.front().features.size();

    std::map<int, ClassPrototype> by_label;
    for (const auto& s : buffer.samples) {
        if (s.label != 0 && s.label != 1) throw Error("buffer sample '" + s.txn_id + "' is unlabelled");
        if (s.features.size() != width) throw DimensionError("buffer samples have mixed feature widths");
        auto& c = by_label[s.label];
        if (c.count == 0) {
            c.label = s.label;
            c.mean.assign(width, 0.0);
            c.sigma.assign(width, 0.0);
        }
        ++c.count;
        for (std::size_t d = 0; d < width; ++d) c.mean[d] += s.features[d];
    }
    for (auto& [label, c] : by_label)
        for (auto& m : c.mean) m /= static_cast<double>(c.count);
    for (const auto& s : buffer.samples) {
        auto& c = by_label[s.label];
        for (std::size_t d = 0; d < width; ++d) {
            const double dev = s.features[d] - c.mean[d];
            c.sigma[d] += dev * dev;
        }
    }

    PrototypeSet out;
    for (auto& [label, c] : by_label) {
        for (auto& s : c.sigma) s = sigma_scale * std::sqrt(s / static_cast<double>(c.count));
        if (c.count == 1)
            out.warnings.push_back("class " + std::to_string(label) +
                                   " has a single buffer sample; its twins collapse onto that sample");
        out.classes.push_back(c);
    }
    for (int label : {0, 1})
        if (!by_label.count(label))
            out.warnings.push_back("class " + std::to_string(label) + " is absent from the buffer; it yields no twins");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    out.twins.reserve(buffer.samples.size());
    for (const auto& s : buffer.samples) {
        const ClassPrototype& c = by_label[s.label];
        ReplaySample twin = s;
        twin.txn_id = "twin-" + s.txn_id;
        for (std::size_t d = 0; d < width; ++d) twin.features[d] = c.mean[d] + c.sigma[d] * normal(rng);
        out.twins.push_back(std::move(twin));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fisher information

ModelParams compute_fisher(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                           std::span<const int> labels, std::span<const int> nodes, Policy policy, double loss_scale) {
    if (nodes.empty()) throw Error("Fisher information needs at least one node");
    const ForwardTrace trace = forward(input, params, hp, policy);
    ModelParams sum = ModelParams::zeros_like(params);
    per_node_gradients(
        input, params, hp, trace, labels, nodes,
        [&](int, const ModelParams& g) {
            g.check_finite("Fisher gradient");
            auto src = g;
            src.for_each([](const std::string&, Matrix& m) { m = m.array().square().matrix(); });
            sum += src;
        },
        policy, loss_scale);
    sum *= 1.0 / static_cast<double>(nodes.size());
    sum.check_finite("Fisher information");
    return sum;
}

// ---------------------------------------------------------------------------
// Smoothing loss

namespace {

void check_state(const ModelParams& params, const FisherState& state) {
    if (!params.same_layout(state.anchor) || !params.same_layout(state.fisher))
        throw DimensionError("smoothing state does not match the parameter layout");
}

} // namespace

double smoothing_loss(const ModelParams& params, const FisherState& state) {
    check_state(params, state);
    double quad = 0.0;
    if (state.lambda != 0.0) {
        const Vector theta = params.flatten(), anchor = state.anchor.flatten(), f = state.fisher.flatten();
        quad = 0.5 * state.lambda * (f.array() * (theta - anchor).array().square()).sum();
    }
    double norm = 0.0;
    if (state.gamma != 0.0)
        norm = state.gamma * (std::sqrt(params.squared_norm()) + std::sqrt(state.anchor.squared_norm()));
    return quad + norm;
}

SmoothingLoss::SmoothingLoss(const FisherState& state) : state_(state) {}

double SmoothingLoss::value(const ModelParams& params) const { return smoothing_loss(params, state_); }

void SmoothingLoss::add_gradient(const ModelParams& params, ModelParams& grad) const {
    check_state(params, state_);
    if (state_.lambda != 0.0) {
        ModelParams diff = params;
        ModelParams neg_anchor = state_.anchor;
        neg_anchor *= -1.0;
        diff += neg_anchor;
        auto f = state_.fisher.flatten();
        Vector d = diff.flatten();
        d = (state_.lambda * f.array() * d.array()).matrix();
        diff.unflatten(d);
        grad += diff;
    }
    if (state_.gamma != 0.0) {
        const double norm = std::sqrt(params.squared_norm());
        if (norm > 0.0) {
            ModelParams g = params;
            g *= state_.gamma / norm;
            grad += g;
        }
    }
}

double total_objective(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                       std::span<const int> labels, std::span<const int> labeled, const FisherState* state,
                       Policy policy) {
    const ForwardTrace t = forward(input, params, hp, policy);
    std::vector<double> pred;
    std::vector<int> y;
    for (int i : labeled) {
        pred.push_back(t.predictions(i));
        y.push_back(labels[static_cast<std::size_t>(i)]);
    }
    double loss = cross_entropy_loss(pred, y);
    if (state) loss += smoothing_loss(params, *state);
    return loss;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_fisher(const std::filesystem::path& path, const FisherState& state) {
    NamedTensors t;
    state.fisher.for_each([&](const std::string& name, const Matrix& m) { t.emplace_back("fisher." + name, m); });
    state.anchor.for_each([&](const std::string& name, const Matrix& m) { t.emplace_back("anchor." + name, m); });
    t.emplace_back("lambda", Matrix::Constant(1, 1, state.lambda));
    t.emplace_back("gamma", Matrix::Constant(1, 1, state.gamma));
    write_tensors(path, t);
}

FisherState load_fisher(const std::filesystem::path& path) {
    const NamedTensors all = read_tensors(path);
    auto with_prefix = [&](const std::string& prefix) {
        ModelParams p;
        p.proj = find_tensor(all, prefix + "proj");
        for (std::size_t i = 0;; ++i) {
            const std::string name = prefix + "node_att." + std::to_string(i);
            auto it = std::find_if(all.begin(), all.end(), [&](const auto& e) { return e.first == name; });
            if (it == all.end()) break;
            p.node_att.push_back(it->second);
        }
        p.sem_w = find_tensor(all, prefix + "sem_w");
        p.sem_b = find_tensor(all, prefix + "sem_b");
        p.sem_q = find_tensor(all, prefix + "sem_q");
        p.clf_w = find_tensor(all, prefix + "clf_w");
        return p;
    };
    FisherState s;
    s.fisher = with_prefix("fisher.");
    s.anchor = with_prefix("anchor.");
    s.lambda = find_tensor(all, "lambda")(0, 0);
    s.gamma = find_tensor(all, "gamma")(0, 0);
    if (!s.fisher.same_layout(s.anchor)) throw Error(path.string() + ": fisher and anchor layouts differ");
    return s;
}

void write_replay_samples(const std::filesystem::path& prefix, std::span<const ReplaySample> samples) {
    const std::string base = prefix.string();
    std::ofstream feat(base + "_features.csv"), ent(base + "_entities.csv");
    if (!feat || !ent) throw IoError("cannot write replay buffer at " + base);
    const std::size_t width = samples.empty() ? 0 : samples.front().features.size();
    std::vector<std::string> row{"txn_id"};
    for (std::size_t d = 0; d < width; ++d) row.push_back("f" + std::to_string(d));
    csv::write_record(feat, row);
    csv::write_record(ent, {"txn_id", "card_holder_id", "merchant_id", "time_slice", "label"});
    for (const auto& s : samples) {
        row.assign(1, s.txn_id);
        for (double v : s.features) row.push_back(csv::format_double(v));
        csv::write_record(feat, row);
        csv::write_record(ent, {s.txn_id, s.card_holder_id, s.merchant_id, std::to_string(s.time_slice),
                                std::to_string(s.label)});
    }
    if (!feat || !ent) throw IoError("failed writing replay buffer at " + base);
}

std::vector<ReplaySample> read_replay_samples(const std::filesystem::path& prefix) {
    const std::string base = prefix.string();
    std::ifstream feat(base + "_features.csv"), ent(base + "_entities.csv");
    if (!feat || !ent) throw IoError("cannot read replay buffer at " + base);
    std::size_t fline = 0, eline = 0;
    const auto fhead = csv::read_record(feat, fline);
    const auto ehead = csv::read_record(ent, eline);
    if (!fhead || !ehead || fhead->empty()) throw SchemaError(base + ": replay buffer files lack headers");
    if (ehead->size() != 5) throw SchemaError(base + "_entities.csv: expected 5 columns");
    const std::size_t width = fhead->size() - 1;

    auto number = [](const std::string& text, std::size_t line) {
        const auto v = csv::parse_double(text);
        if (!v) throw RowError(line, "not a number: '" + text + "'");
        return *v;
    };
    auto integer = [](const std::string& text, std::size_t line) {
        const auto v = csv::parse_int(text);
        if (!v) throw RowError(line, "not an integer: '" + text + "'");
        return static_cast<int>(*v);
    };

    std::vector<ReplaySample> out;
    while (const auto erow = csv::read_record(ent, eline)) {
        const auto frow = csv::read_record(feat, fline);
        if (!frow) throw RowError(fline, "feature file is shorter than entity file");
        if (erow->size() != 5) throw RowError(eline, "expected 5 fields");
        if (frow->size() != width + 1 || (*frow)[0] != (*erow)[0])
            throw RowError(fline, "feature row does not match entity row");
        ReplaySample s;
        s.txn_id = (*erow)[0];
        s.card_holder_id = (*erow)[1];
        s.merchant_id = (*erow)[2];
        s.time_slice = integer((*erow)[3], eline);
        s.label = integer((*erow)[4], eline);
        for (std::size_t d = 0; d < width; ++d) s.features.push_back(number((*frow)[d + 1], fline));
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace tradegraph
