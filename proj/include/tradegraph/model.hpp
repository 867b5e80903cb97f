#pragma once

#include "tradegraph/common.hpp"
#include "tradegraph/htg.hpp"
#include "tradegraph/kernels.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tradegraph {

using kernels::Policy;

enum class Activation { elu, tanh, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct Hyperparams {
    int hidden = 64;
    int heads = 8;
    int semantic = 128;
    double leaky_slope = 0.2;
    Activation activation = Activation::elu;

    int head_width() const { return hidden / heads; }
    void validate() const;
};

/// Every learnable tensor. Vectors are stored as single-column matrices so that the
/// whole set can be walked uniformly; gradients, Adam moments and Fisher estimates
/// reuse this type with the same layout.
struct ModelParams {
    Matrix proj;                  // d_h x d_in        h = proj . x
    std::vector<Matrix> node_att; // per meta-path: K x 2w, row k = [a_src | a_dst]
    Matrix sem_w;                 // d_sem x d_h
    Matrix sem_b;                 // d_sem x 1
    Matrix sem_q;                 // d_sem x 1
    Matrix clf_w;                 // (d_h + 1) x 1, last entry is the bias

    /// Glorot-uniform initialization; biases start at zero.
    static ModelParams init(const Hyperparams& hp, std::size_t input_width, std::size_t num_paths, std::uint64_t seed);
    static ModelParams zeros_like(const ModelParams& other);

    std::size_t num_paths() const { return node_att.size(); }
    std::size_t input_width() const { return static_cast<std::size_t>(proj.cols()); }
    std::size_t size() const;

    template <class F>
    void for_each(F&& f) {
        f(std::string("proj"), proj);
        for (std::size_t p = 0; p < node_att.size(); ++p) f("node_att." + std::to_string(p), node_att[p]);
        f(std::string("sem_w"), sem_w);
        f(std::string("sem_b"), sem_b);
        f(std::string("sem_q"), sem_q);
        f(std::string("clf_w"), clf_w);
    }
    template <class F>
    void for_each(F&& f) const {
        const_cast<ModelParams*>(this)->for_each([&](const std::string& name, Matrix& m) { f(name, std::as_const(m)); });
    }

    bool same_layout(const ModelParams& other) const;
    Vector flatten() const;
    void unflatten(const Vector& flat);
    /// Sum of squares over every entry.
    double squared_norm() const;
    /// Throws NumericError naming the first tensor holding a NaN or Inf.
    void check_finite(std::string_view context) const;

    ModelParams& operator+=(const ModelParams& other);
    ModelParams& operator*=(double s);

    friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Throws DimensionError unless the parameters fit the hyperparameters and graph.
void check_params(const ModelParams& params, const Hyperparams& hp, std::size_t input_width, std::size_t num_paths);

// ---------------------------------------------------------------------------
// Stages

Matrix project_features(const Matrix& x, const ModelParams& params);

struct HeadAttention {
    std::vector<std::vector<double>> alpha; // alpha[i][t] pairs with neighbors[i][t]
    Matrix z;                               // N x w, after the activation
};

/// Single head of node-level attention, computed edge by edge.
HeadAttention node_level_attention(const Matrix& h, const MetaPathAdjacency& adj, const Matrix& att, int head,
                                   const Hyperparams& hp);

struct SemanticResult {
    Vector scores;  // w^P, one per path
    Vector weights; // beta, softmax of the scores
    Matrix fused;   // sum_P beta_P Z_P
};

SemanticResult semantic_attention(std::span<const Matrix> path_embeddings, const ModelParams& params);

/// sigmoid(clf . [z, 1]) clamped to [delta, 1 - delta].
Vector classify(const Matrix& fused, const ModelParams& params);

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean binary cross-entropy with predictions clamped to [delta, 1 - delta].
double cross_entropy_loss(std::span<const double> predictions, std::span<const int> labels);

double apply_activation(Activation a, double x);
double activation_derivative(Activation a, double pre, double post);

// ---------------------------------------------------------------------------
// Forward / backward

struct ForwardTrace {
    Matrix projected;                              // h, N x d_h
    std::vector<kernels::AttentionState> attention; // per path
    std::vector<Matrix> path_embeddings;           // Z_P, N x d_h
    std::vector<Matrix> semantic_hidden;           // tanh(W' z + b), N x d_sem per path
    Vector semantic_scores;                        // w^P
    Vector path_weights;                           // beta
    Matrix fused;                                  // Z
    Vector logits;
    Vector predictions;                            // y_hat

    /// alpha_ij for path p and head k; j must be in N_i.
    double alpha(std::size_t path, int head, std::size_t i, std::size_t j, double slope) const {
        return kernels::attention_coefficient(attention[path], head, i, j, slope);
    }
};

/// The graph side of a forward pass: features plus one adjacency per meta-path.
struct GraphInput {
    const Matrix& features;
    std::span<const MetaPathAdjacency> adjacencies;
};

ForwardTrace forward(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                     Policy policy = Policy::parallel);

/// A differentiable term added to the cross-entropy objective.
class LossTerm {
public:
    virtual ~LossTerm() = default;
    virtual double value(const ModelParams& params) const = 0;
    virtual void add_gradient(const ModelParams& params, ModelParams& grad) const = 0;
};

struct GradientResult {
    double loss = 0.0;          // cross-entropy + extra terms
    double data_loss = 0.0;     // cross-entropy alone
    ModelParams grad;
};

/// Exact gradient of  scale * (mean CE over `labeled`) + sum(extra terms)  at `params`.
/// The trace must come from forward() at the same params.
GradientResult compute_gradients(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                                 const ForwardTrace& trace, std::span<const int> labels,
                                 std::span<const int> labeled, std::span<const LossTerm* const> extra = {},
                                 Policy policy = Policy::parallel, double scale = 1.0);

GradientResult compute_gradients(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                                 std::span<const int> labels, std::span<const int> labeled,
                                 std::span<const LossTerm* const> extra = {}, Policy policy = Policy::parallel,
                                 double scale = 1.0);

/// Calls `visit(node, grad)` with the gradient of the single-node loss
/// scale * CE(y_hat_node, y_node) for each node in `nodes`, in order. The same
/// ModelParams buffer is reused between calls.
void per_node_gradients(const GraphInput& input, const ModelParams& params, const Hyperparams& hp,
                        const ForwardTrace& trace, std::span<const int> labels, std::span<const int> nodes,
                        const std::function<void(int, const ModelParams&)>& visit, Policy policy = Policy::parallel,
                        double scale = 1.0);

// ---------------------------------------------------------------------------
// Checkpoints

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

} // namespace tradegraph
