#pragma once

#include "tradegraph/common.hpp"
#include "tradegraph/data.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tradegraph {

enum class NodeType { transaction, card_holder, merchant, time_slice };
enum class EdgeType { transaction_card_holder, transaction_merchant, transaction_time_slice };

inline constexpr std::size_t kNodeTypeCount = 4;
inline constexpr std::size_t kEdgeTypeCount = 3;

std::string_view to_string(NodeType t);
std::string_view to_string(EdgeType t);

/// Transactions plus the three entity types they attach to. Every transaction owns
/// exactly one edge of each type, so edges are stored as one entity index per
/// transaction and per edge type.
///
/// Global node numbering (for node_type): transactions first, then card holders,
/// merchants, time slices. Global edge numbering (for edge_type): all T-C edges,
/// then T-M, then T-S, each in transaction order.
struct HeteroTradeGraph {
    std::vector<std::string> txn_ids;
    Matrix features;            // |T| x d_in
    std::vector<int> labels;    // |T|

    std::vector<std::string> card_holders;
    std::vector<std::string> merchants;
    std::vector<int> time_slices; // hour in [0, 23] of each S node

    std::vector<int> txn_card_holder;
    std::vector<int> txn_merchant;
    std::vector<int> txn_time_slice;

    std::size_t num_transactions() const { return txn_ids.size(); }
    std::size_t feature_width() const { return static_cast<std::size_t>(features.cols()); }
    std::size_t num_nodes() const {
        return txn_ids.size() + card_holders.size() + merchants.size() + time_slices.size();
    }
    std::size_t num_edges() const { return kEdgeTypeCount * txn_ids.size(); }

    NodeType node_type(std::size_t global_node) const;
    EdgeType edge_type(std::size_t global_edge) const;
    std::size_t entity_count(NodeType t) const;
    /// Entity index of transaction `txn` for an intermediate node type.
    int entity_of(std::size_t txn, NodeType t) const;
    int time_slice_hour(std::size_t txn) const { return time_slices[static_cast<std::size_t>(txn_time_slice[txn])]; }

    /// Checks the structural invariants; throws Error when violated.
    void validate() const;

    friend bool operator==(const HeteroTradeGraph& a, const HeteroTradeGraph& b);
};

HeteroTradeGraph build_htg(const Dataset& ds);

/// A labelled transaction outside the current graph, ready to be wired in by entity ids.
struct ReplaySample {
    std::string txn_id;
    std::string card_holder_id;
    std::string merchant_id;
    int time_slice = 0; // hour
    int label = 0;
    std::vector<double> features;
};

/// Appends the samples as new transaction nodes. Entity nodes are reused when ids match.
HeteroTradeGraph merge_replay_into_htg(const HeteroTradeGraph& g, std::span<const ReplaySample> replay);

/// Builds a ReplaySample from an existing transaction node.
ReplaySample replay_sample_of(const HeteroTradeGraph& g, std::size_t txn);

// ---------------------------------------------------------------------------
// Meta-paths

struct MetaPathSpec {
    std::string name;
    std::vector<NodeType> node_chain;
    std::vector<EdgeType> relation_chain;

    static MetaPathSpec tct();
    static MetaPathSpec tmt();
    static MetaPathSpec tst();
    /// Parses "TCT", "TMT" or "TST".
    static MetaPathSpec from_name(std::string_view name);

    /// Throws Error unless the chain is T-X-T with matching relations.
    void validate() const;
    NodeType intermediate() const { return node_chain.at(1); }
};

std::vector<MetaPathSpec> default_metapaths();

/// Neighbor lists N_i over transaction nodes. Each list is sorted and contains i.
/// For the two-hop T-X-T paths the relation is an equivalence, so the lists are
/// exactly the member lists of `groups` (one group per intermediate entity in use);
/// `group_of[i]` indexes the group holding i. Hand-built adjacencies may leave
/// `groups` empty, in which case kernels fall back to the edge-wise path.
struct MetaPathAdjacency {
    MetaPathSpec spec;
    std::vector<std::vector<int>> neighbors;
    std::vector<std::vector<int>> groups;
    std::vector<int> group_of;

    std::size_t num_nodes() const { return neighbors.size(); }
    std::size_t num_pairs() const;
    bool grouped() const { return !groups.empty(); }
};

MetaPathAdjacency extract_metapath_neighbors(const HeteroTradeGraph& g, const MetaPathSpec& spec);
/// One adjacency per spec; specs are processed concurrently.
std::vector<MetaPathAdjacency> extract_metapaths(const HeteroTradeGraph& g, std::span<const MetaPathSpec> specs);

/// Wraps explicit neighbor lists (used for hand-built test graphs). Lists are sorted
/// and must contain their own node.
MetaPathAdjacency adjacency_from_lists(std::string name, std::vector<std::vector<int>> neighbors);

// ---------------------------------------------------------------------------
// Serialization: nodes_{type}.csv, edges_{type}.csv, features.csv, labels.csv

void save_graph(const std::filesystem::path& dir, const HeteroTradeGraph& g);
HeteroTradeGraph load_graph(const std::filesystem::path& dir);

} // namespace tradegraph
