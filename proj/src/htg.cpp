#include "tradegraph/htg.hpp"

#include <algorithm>
#include <unordered_map>

namespace tradegraph {

std::string_view to_string(NodeType t) {
    switch (t) {
    case NodeType::transaction: return "transaction";
    case NodeType::card_holder: return "card_holder";
    case NodeType::merchant: return "merchant";
    case NodeType::time_slice: return "time_slice";
    }
    return "?";
}

std::string_view to_string(EdgeType t) {
    switch (t) {
    case EdgeType::transaction_card_holder: return "transaction_card_holder";
    case EdgeType::transaction_merchant: return "transaction_merchant";
    case EdgeType::transaction_time_slice: return "transaction_time_slice";
    }
    return "?";
}

NodeType HeteroTradeGraph::node_type(std::size_t v) const {
    if (v < txn_ids.size()) return NodeType::transaction;
    v -= txn_ids.size();
    if (v < card_holders.size()) return NodeType::card_holder;
    v -= card_holders.size();
    if (v < merchants.size()) return NodeType::merchant;
    v -= merchants.size();
    if (v < time_slices.size()) return NodeType::time_slice;
    throw Error("node index out of range");
}

EdgeType HeteroTradeGraph::edge_type(std::size_t e) const {
    const std::size_t n = txn_ids.size();
    if (e < n) return EdgeType::transaction_card_holder;
    if (e < 2 * n) return EdgeType::transaction_merchant;
    if (e < 3 * n) return EdgeType::transaction_time_slice;
    throw Error("edge index out of range");
}

std::size_t HeteroTradeGraph::entity_count(NodeType t) const {
    switch (t) {
    case NodeType::transaction: return txn_ids.size();
    case NodeType::card_holder: return card_holders.size();
    case NodeType::merchant: return merchants.size();
    case NodeType::time_slice: return time_slices.size();
    }
    return 0;
}

int HeteroTradeGraph::entity_of(std::size_t txn, NodeType t) const {
    switch (t) {
    case NodeType::card_holder: return txn_card_holder[txn];
    case NodeType::merchant: return txn_merchant[txn];
    case NodeType::time_slice: return txn_time_slice[txn];
    case NodeType::transaction: break;
    }
    throw Error("transaction is not an intermediate node type");
}

void HeteroTradeGraph::validate() const {
    const std::size_t n = txn_ids.size();
    if (static_cast<std::size_t>(features.rows()) != n || labels.size() != n || txn_card_holder.size() != n ||
        txn_merchant.size() != n || txn_time_slice.size() != n)
        throw Error("graph arrays disagree on the transaction count");
    auto in_range = [](const std::vector<int>& v, std::size_t bound) {
        return std::all_of(v.begin(), v.end(), [&](int x) { return x >= 0 && static_cast<std::size_t>(x) < bound; });
    };
    if (!in_range(txn_card_holder, card_holders.size()) || !in_range(txn_merchant, merchants.size()) ||
        !in_range(txn_time_slice, time_slices.size()))
        throw Error("edge endpoint out of range");
    if (time_slices.size() > 24 || !std::all_of(time_slices.begin(), time_slices.end(), [](int h) { return h >= 0 && h < 24; }))
        throw Error("time-slice nodes must be hours in [0, 23]");
    for (int y : labels)
        if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
}

bool operator==(const HeteroTradeGraph& a, const HeteroTradeGraph& b) {
    return a.txn_ids == b.txn_ids && a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
           a.features == b.features && a.labels == b.labels && a.card_holders == b.card_holders &&
           a.merchants == b.merchants && a.time_slices == b.time_slices && a.txn_card_holder == b.txn_card_holder &&
           a.txn_merchant == b.txn_merchant && a.txn_time_slice == b.txn_time_slice;
}

namespace {

class EntityIndex {
public:
    EntityIndex(std::vector<std::string>& names) : names_(names) {
        for (std::size_t i = 0; i < names.size(); ++i) index_.emplace(names[i], static_cast<int>(i));
    }
    int intern(const std::string& id) {
        auto [it, inserted] = index_.try_emplace(id, static_cast<int>(names_.size()));
        if (inserted) names_.push_back(id);
        return it->second;
    }

private:
    std::vector<std::string>& names_;
    std::unordered_map<std::string, int> index_;
};

int intern_slice(std::vector<int>& slices, int hour) {
    auto it = std::find(slices.begin(), slices.end(), hour);
    if (it != slices.end()) return static_cast<int>(it - slices.begin());
    slices.push_back(hour);
    return static_cast<int>(slices.size()) - 1;
}

} // namespace

HeteroTradeGraph build_htg(const Dataset& ds) {
    if (ds.empty()) throw Error("cannot build a graph from an empty dataset");
    HeteroTradeGraph g;
    const std::size_t n = ds.size();
    g.txn_ids.reserve(n);
    g.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFeatureWidth));
    g.labels.reserve(n);
    g.txn_card_holder.reserve(n);
    g.txn_merchant.reserve(n);
    g.txn_time_slice.reserve(n);

    EntityIndex cards(g.card_holders), merchants(g.merchants);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = ds.records[i];
        g.txn_ids.push_back(r.txn_id);
        const auto f = transaction_features(r);
        for (std::size_t k = 0; k < kFeatureWidth; ++k) g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
        g.labels.push_back(r.label);
        g.txn_card_holder.push_back(cards.intern(r.card_holder_id));
        g.txn_merchant.push_back(merchants.intern(r.merchant_id));
        g.txn_time_slice.push_back(intern_slice(g.time_slices, r.timestamp.hour));
    }
    return g;
}

HeteroTradeGraph merge_replay_into_htg(const HeteroTradeGraph& g, std::span<const ReplaySample> replay) {
    for (const auto& s : replay) {
        if (s.features.size() != g.feature_width())
            throw DimensionError("replay sample '" + s.txn_id + "' has " + std::to_string(s.features.size()) +
                                 " features, graph expects " + std::to_string(g.feature_width()));
        if (s.time_slice < 0 || s.time_slice > 23) throw Error("replay sample '" + s.txn_id + "' has an invalid hour");
        if (s.label != 0 && s.label != 1) throw Error("replay sample '" + s.txn_id + "' is unlabelled");
    }
    HeteroTradeGraph out = g;
    if (replay.empty()) return out;

    const auto n0 = static_cast<Eigen::Index>(g.num_transactions());
    out.features.conservativeResize(n0 + static_cast<Eigen::Index>(replay.size()), Eigen::NoChange);
    EntityIndex cards(out.card_holders), merchants(out.merchants);
    for (std::size_t k = 0; k < replay.size(); ++k) {
        const auto& s = replay[k];
        out.txn_ids.push_back(s.txn_id);
        for (std::size_t c = 0; c < s.features.size(); ++c) out.features(n0 + static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = s.features[c];
        out.labels.push_back(s.label);
        out.txn_card_holder.push_back(cards.intern(s.card_holder_id));
        out.txn_merchant.push_back(merchants.intern(s.merchant_id));
        out.txn_time_slice.push_back(intern_slice(out.time_slices, s.time_slice));
    }
    return out;
}

ReplaySample replay_sample_of(const HeteroTradeGraph& g, std::size_t txn) {
    ReplaySample s;
    s.txn_id = g.txn_ids[txn];
    s.card_holder_id = g.card_holders[static_cast<std::size_t>(g.txn_card_holder[txn])];
    s.merchant_id = g.merchants[static_cast<std::size_t>(g.txn_merchant[txn])];
    s.time_slice = g.time_slice_hour(txn);
    s.label = g.labels[txn];
    const auto row = g.features.row(static_cast<Eigen::Index>(txn));
    s.features.assign(row.data(), row.data() + row.size());
    return s;
}

// ---------------------------------------------------------------------------
// Meta-paths

MetaPathSpec MetaPathSpec::tct() {
    return {"TCT",
            {NodeType::transaction, NodeType::card_holder, NodeType::transaction},
            {EdgeType::transaction_card_holder, EdgeType::transaction_card_holder}};
}

MetaPathSpec MetaPathSpec::tmt() {
    return {"TMT",
            {NodeType::transaction, NodeType::merchant, NodeType::transaction},
            {EdgeType::transaction_merchant, EdgeType::transaction_merchant}};
}

MetaPathSpec MetaPathSpec::tst() {
    return {"TST",
            {NodeType::transaction, NodeType::time_slice, NodeType::transaction},
            {EdgeType::transaction_time_slice, EdgeType::transaction_time_slice}};
}

MetaPathSpec MetaPathSpec::from_name(std::string_view name) {
    if (name == "TCT") return tct();
    if (name == "TMT") return tmt();
    if (name == "TST") return tst();
    throw Error("unknown meta-path '" + std::string(name) + "'");
}

void MetaPathSpec::validate() const {
    if (node_chain.size() != 3 || relation_chain.size() != 2)
        throw Error("meta-path " + name + ": only two-hop T-X-T paths are supported");
    if (node_chain.front() != NodeType::transaction || node_chain.back() != NodeType::transaction)
        throw Error("meta-path " + name + ": chain must start and end at transactions");
    EdgeType expected{};
    switch (node_chain[1]) {
    case NodeType::card_holder: expected = EdgeType::transaction_card_holder; break;
    case NodeType::merchant: expected = EdgeType::transaction_merchant; break;
    case NodeType::time_slice: expected = EdgeType::transaction_time_slice; break;
    case NodeType::transaction: throw Error("meta-path " + name + ": intermediate node type must be an entity type");
    }
    if (relation_chain[0] != expected || relation_chain[1] != expected)
        throw Error("meta-path " + name + ": relations do not match the intermediate node type");
}

std::vector<MetaPathSpec> default_metapaths() { return {MetaPathSpec::tct(), MetaPathSpec::tmt(), MetaPathSpec::tst()}; }

std::size_t MetaPathAdjacency::num_pairs() const {
    std::size_t total = 0;
    for (const auto& n : neighbors) total += n.size();
    return total;
}

MetaPathAdjacency extract_metapath_neighbors(const HeteroTradeGraph& g, const MetaPathSpec& spec) {
    spec.validate();
    const NodeType mid = spec.intermediate();
    const std::size_t n = g.num_transactions();

    // Group transactions by their intermediate entity; groups are numbered by first appearance.
    std::vector<int> group_of_entity(g.entity_count(mid), -1);
    MetaPathAdjacency adj;
    adj.spec = spec;
    adj.group_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto e = static_cast<std::size_t>(g.entity_of(i, mid));
        if (group_of_entity[e] < 0) {
            group_of_entity[e] = static_cast<int>(adj.groups.size());
            adj.groups.emplace_back();
        }
        adj.group_of[i] = group_of_entity[e];
        adj.groups[static_cast<std::size_t>(group_of_entity[e])].push_back(static_cast<int>(i));
    }
    adj.neighbors.resize(n);
    for (std::size_t i = 0; i < n; ++i) adj.neighbors[i] = adj.groups[static_cast<std::size_t>(adj.group_of[i])];
    return adj;
}

std::vector<MetaPathAdjacency> extract_metapaths(const HeteroTradeGraph& g, std::span<const MetaPathSpec> specs) {
    std::vector<MetaPathAdjacency> out(specs.size());
    for (const auto& s : specs) s.validate();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(specs.size()); ++p)
        out[static_cast<std::size_t>(p)] = extract_metapath_neighbors(g, specs[static_cast<std::size_t>(p)]);
    return out;
}

MetaPathAdjacency adjacency_from_lists(std::string name, std::vector<std::vector<int>> neighbors) {
    MetaPathAdjacency adj;
    adj.spec.name = std::move(name);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        auto& list = neighbors[i];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        if (list.empty()) throw Error("adjacency " + adj.spec.name + ": empty neighbor list");
        for (int j : list)
            if (j < 0 || static_cast<std::size_t>(j) >= neighbors.size())
                throw Error("adjacency " + adj.spec.name + ": neighbor index out of range");
        if (!std::binary_search(list.begin(), list.end(), static_cast<int>(i)))
            throw Error("adjacency " + adj.spec.name + ": node " + std::to_string(i) + " is missing from its own list");
    }
    adj.neighbors = std::move(neighbors);
    return adj;
}

} // namespace tradegraph
