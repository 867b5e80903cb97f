#pragma once

// Node-level attention kernels for one meta-path with K heads.
//
// Head k works on the column slice [k*w, (k+1)*w) of the projected features h,
// w = d_h / K. Row k of the attention matrix holds [a_src | a_dst] (width 2w).
//
//   e_ij = LeakyReLU(a_src . h_i + a_dst . h_j)
//   alpha_ij = softmax_j(e_ij) over j in N_i
//   u_i = sum_j alpha_ij h_j
//
// Two implementations are kept:
//   reference  serial, edge by edge over the neighbor lists; works on any adjacency.
//   grouped    OpenMP over meta-path groups. Two-hop T-X-T neighborhoods are cliques
//              (everyone sharing an entity sees everyone else), so within a group the
//              softmax splits at the LeakyReLU kink into a prefix and a suffix of the
//              members sorted by their destination score. Prefix sums make each node
//              O(log |G| + w) instead of O(|G| w).
// Results agree to rounding; the reference is the oracle in tests and the benchmark baseline.

#include "tradegraph/common.hpp"
#include "tradegraph/htg.hpp"

#include <vector>

namespace tradegraph::kernels {

enum class Policy { reference, parallel };

/// Per-node quantities from which every attention coefficient can be rebuilt:
/// alpha_ij = exp(LeakyReLU(src_i + dst_j) - max_logit_i) / normalizer_i.
struct AttentionState {
    Matrix src;         // N x K
    Matrix dst;         // N x K
    Matrix max_logit;   // N x K
    Matrix normalizer;  // N x K
    Matrix aggregated;  // N x d_h, u before the activation
};

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

/// src/dst scores for every node and head.
void attention_scores(const Matrix& h, const Matrix& att, AttentionState& out, bool parallel = false);

void attention_forward_reference(const Matrix& h, const std::vector<std::vector<int>>& neighbors, const Matrix& att,
                                 double slope, AttentionState& out);
void attention_forward_grouped(const Matrix& h, const std::vector<std::vector<int>>& groups, const Matrix& att,
                               double slope, AttentionState& out);

/// Accumulates dL/dh into d_h and dL/datt into d_att given dL/du (d_aggregated).
void attention_backward_reference(const Matrix& h, const std::vector<std::vector<int>>& neighbors, const Matrix& att,
                                  double slope, const AttentionState& state, const Matrix& d_aggregated, Matrix& d_h,
                                  Matrix& d_att);
void attention_backward_grouped(const Matrix& h, const std::vector<std::vector<int>>& groups, const Matrix& att,
                                double slope, const AttentionState& state, const Matrix& d_aggregated, Matrix& d_h,
                                Matrix& d_att);

/// Picks the grouped kernel when the policy allows it and the adjacency carries groups.
void attention_forward(const Matrix& h, const MetaPathAdjacency& adj, const Matrix& att, double slope, Policy policy,
                       AttentionState& out);
void attention_backward(const Matrix& h, const MetaPathAdjacency& adj, const Matrix& att, double slope, Policy policy,
                        const AttentionState& state, const Matrix& d_aggregated, Matrix& d_h, Matrix& d_att);

double attention_coefficient(const AttentionState& state, int head, std::size_t i, std::size_t j, double slope);

/// Backward for the loss of a single target node i, restricted to its own neighborhood:
/// given dL/du_i (width d_h) it accumulates into d_att and directly into the
/// projection gradient d_proj (d_h x d_in) using h = X proj^T. Cost O(|N_i| (w + d_in)) per head.
void attention_node_backward(const Matrix& x, const Matrix& h, const std::vector<int>& neighbors, const Matrix& att,
                             double slope, const AttentionState& state, std::size_t i,
                             const Eigen::Ref<const Eigen::RowVectorXd>& d_u, Matrix& d_att, Matrix& d_proj);

} // namespace tradegraph::kernels
