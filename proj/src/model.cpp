#include "tradegraph/model.hpp"

#include "tradegraph/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tradegraph {

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(std::string_view name) {
    if (name == "elu") return Activation::elu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw ConfigError("activation", "unknown activation '" + std::string(name) + "'");
}

void Hyperparams::validate() const {
    if (hidden <= 0) throw ConfigError("hidden", "must be positive");
    if (heads <= 0) throw ConfigError("heads", "must be positive");
    if (semantic <= 0) throw ConfigError("semantic", "must be positive");
    if (hidden % heads != 0) throw ConfigError("heads", "must divide hidden");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope", "must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// ModelParams

ModelParams ModelParams::init(const Hyperparams& hp, std::size_t input_width, std::size_t num_paths, std::uint64_t seed) {
    hp.validate();
    const auto d_in = static_cast<Eigen::Index>(input_width);
    const Eigen::Index d_h = hp.hidden, d_sem = hp.semantic, heads = hp.heads, w = hp.head_width();
    std::mt19937_64 rng(seed);
    auto glorot = [&](Matrix& m, Eigen::Index fan_in, Eigen::Index fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    };

    ModelParams p;
    p.proj.resize(d_h, d_in);
    glorot(p.proj, d_in, d_h);
    p.node_att.resize(num_paths);
    for (auto& a : p.node_att) {
        a.resize(heads, 2 * w);
        glorot(a, 2 * w, 1);
    }
    p.sem_w.resize(d_sem, d_h);
    glorot(p.sem_w, d_h, d_sem);
    p.sem_b = Matrix::Zero(d_sem, 1);
    p.sem_q.resize(d_sem, 1);
    glorot(p.sem_q, d_sem, 1);
    p.clf_w = Matrix::Zero(d_h + 1, 1);
    Matrix head(d_h, 1);
    glorot(head, d_h, 1);
    p.clf_w.topRows(d_h) = head;
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
    ModelParams z = other;
    z.for_each([](const std::string&, Matrix& m) { m.setZero(); });
    return z;
}

std::size_t ModelParams::size() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

bool ModelParams::same_layout(const ModelParams& o) const {
    if (node_att.size() != o.node_att.size()) return false;
    bool same = true;
    auto shape = [](const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
    same = same && shape(proj, o.proj) && shape(sem_w, o.sem_w) && shape(sem_b, o.sem_b) && shape(sem_q, o.sem_q) &&
           shape(clf_w, o.clf_w);
    for (std::size_t p = 0; same && p < node_att.size(); ++p) same = shape(node_att[p], o.node_att[p]);
    return same;
}

Vector ModelParams::flatten() const {
    Vector flat(static_cast<Eigen::Index>(size()));
    Eigen::Index offset = 0;
    for_each([&](const std::string&, const Matrix& m) {
        flat.segment(offset, m.size()) = m.reshaped<Eigen::RowMajor>();
        offset += m.size();
    });
    return flat;
}

void ModelParams::unflatten(const Vector& flat) {
    if (static_cast<std::size_t>(flat.size()) != size()) throw DimensionError("flat vector does not match parameter count");
    Eigen::Index offset = 0;
    for_each([&](const std::string&, Matrix& m) {
        m.reshaped<Eigen::RowMajor>() = flat.segment(offset, m.size());
        offset += m.size();
    });
}

double ModelParams::squared_norm() const {
    double s = 0.0;
    for_each([&](const std::string&, const Matrix& m) { s += m.squaredNorm(); });
    return s;
}

void ModelParams::check_finite(std::string_view context) const {
    for_each([&](const std::string& name, const Matrix& m) {
        if (!m.allFinite()) throw NumericError(name, std::string(context) + " produced a non-finite value");
    });
}

ModelParams& ModelParams::operator+=(const ModelParams& o) {
    if (!same_layout(o)) throw DimensionError("parameter layouts differ");
    proj += o.proj;
    for (std::size_t p = 0; p < node_att.size(); ++p) node_att[p] += o.node_att[p];
    sem_w += o.sem_w;
    sem_b += o.sem_b;
    sem_q += o.sem_q;
    clf_w += o.clf_w;
    return *this;
}

ModelParams& ModelParams::operator*=(double s) {
    for_each([&](const std::string&, Matrix& m) { m *= s; });
    return *this;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!a.same_layout(b)) return false;
    return a.flatten() == b.flatten();
}

void check_params(const ModelParams& p, const Hyperparams& hp, std::size_t input_width, std::size_t num_paths) {
    hp.validate();
    const Eigen::Index d_h = hp.hidden, d_sem = hp.semantic, w = hp.head_width();
    auto expect = [](const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
        if (m.rows() != r || m.cols() != c)
            throw DimensionError(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
                                 std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
    };
    expect(p.proj, d_h, static_cast<Eigen::Index>(input_width), "proj");
    if (p.node_att.size() != num_paths)
        throw DimensionError("parameters cover " + std::to_string(p.node_att.size()) + " meta-paths, graph has " +
                             std::to_string(num_paths));
    for (const auto& a : p.node_att) expect(a, hp.heads, 2 * w, "node_att");
    expect(p.sem_w, d_sem, d_h, "sem_w");
    expect(p.sem_b, d_sem, 1, "sem_b");
    expect(p.sem_q, d_sem, 1, "sem_q");
    expect(p.clf_w, d_h + 1, 1, "clf_w");
}

// ---------------------------------------------------------------------------
// Stages

double apply_activation(Activation a, double x) {
    switch (a) {
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::tanh: return std::tanh(x);
    case Activation::identity: return x;
    }
    return x;
}

double activation_derivative(Activation a, double pre, double post) {
    switch (a) {
    case Activation::elu: return pre > 0.0 ? 1.0 : post + 1.0;
    case Activation::tanh: return 1.0 - post * post;
    case Activation::identity: return 1.0;
    }
    return 1.0;
}

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Predictions live in [delta, 1 - delta], the range the loss reads them in.
double clamped_sigmoid(double x) { return std::clamp(sigmoid(x), kProbabilityClamp, 1.0 - kProbabilityClamp); }

Vector softmax(const Vector& v) {
    Vector e = (v.array() - v.maxCoeff()).exp();
    return e / e.sum();
}

Matrix activate(Activation a, const Matrix& pre) {
    return pre.unaryExpr([a](double x) { return apply_activation(a, x); });
}

// tanh(Z W'^T + b) for one path.
Matrix semantic_hidden(const Matrix& z, const ModelParams& p) {
    Matrix pre = z * p.sem_w.transpose();
    pre.rowwise() += p.sem_b.col(0).transpose();
    return pre.array().tanh().matrix();
}

void check_graph_input(const GraphInput& in) {
    if (in.features.rows() == 0) throw Error("graph has no transaction nodes");
    for (const auto& adj : in.adjacencies)
        if (static_cast<Eigen::Index>(adj.num_nodes()) != in.features.rows())
            throw DimensionError("adjacency " + adj.spec.name + " does not match the node count");
}

} // namespace

Matrix project_features(const Matrix& x, const ModelParams& params) {
    if (x.cols() != params.proj.cols())
        throw DimensionError("features have width " + std::to_string(x.cols()) + ", projection expects " +
                             std::to_string(params.proj.cols()));
    return x * params.proj.transpose();
}

HeadAttention node_level_attention(const Matrix& h, const MetaPathAdjacency& adj, const Matrix& att, int head,
                                   const Hyperparams& hp) {
    hp.validate();
    if (head < 0 || head >= hp.heads) throw DimensionError("head index out of range");
    kernels::AttentionState st;
    kernels::attention_forward_reference(h, adj.neighbors, att, hp.leaky_slope, st);
    const Eigen::Index w = hp.head_width();
    HeadAttention out;
    out.alpha.resize(adj.num_nodes());
    for (std::size_t i = 0; i < adj.num_nodes(); ++i)
        for (int j : adj.neighbors[i])
            out.alpha[i].push_back(kernels::attention_coefficient(st, head, i, static_cast<std::size_t>(j), hp.leaky_slope));
    out.z = activate(hp.activation, st.aggregated.middleCols(head * w, w));
    return out;
}

SemanticResult semantic_attention(std::span<const Matrix> paths, const ModelParams& params) {
    if (paths.empty()) throw DimensionError("semantic attention needs at least one meta-path");
    for (const auto& z : paths)
        if (z.rows() != paths[0].rows() || z.cols() != paths[0].cols() || z.cols() != params.sem_w.cols())
            throw DimensionError("path embeddings must share one shape matching sem_w");
    SemanticResult r;
    r.scores.resize(static_cast<Eigen::Index>(paths.size()));
    for (std::size_t p = 0; p < paths.size(); ++p)
        r.scores(static_cast<Eigen::Index>(p)) = (semantic_hidden(paths[p], params) * params.sem_q).mean();
    r.weights = softmax(r.scores);
    r.fused = Matrix::Zero(paths[0].rows(), paths[0].cols());
    for (std::size_t p = 0; p < paths.size(); ++p) r.fused += r.weights(static_cast<Eigen::Index>(p)) * paths[p];
    return r;
}

Vector classify(const Matrix& fused, const ModelParams& params) {
    const Eigen::Index d_h = params.clf_w.rows() - 1;
    if (fused.cols() != d_h) throw DimensionError("fused embedding width does not match the classifier");
    Vector logits = fused * params.clf_w.topRows(d_h);
    logits.array() += params.clf_w(d_h, 0);
    return logits.unaryExpr([](double x) { return clamped_sigmoid(x); });
}

double cross_entropy_loss(std::span<const double> pred, std::span<const int> y) {
    if (pred.empty() || pred.size() != y.size()) throw DimensionError("cross-entropy needs equal nonempty inputs");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
        total -= y[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    return total / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Forward

ForwardTrace forward(const GraphInput& in, const ModelParams& params, const Hyperparams& hp, Policy policy) {
    check_graph_input(in);
    check_params(params, hp, static_cast<std::size_t>(in.features.cols()), in.adjacencies.size());
    const std::size_t m = in.adjacencies.size();
    if (m == 0) throw DimensionError("forward needs at least one meta-path");

    ForwardTrace t;
    t.projected = project_features(in.features, params);
    t.attention.resize(m);
    t.path_embeddings.resize(m);
    t.semantic_hidden.resize(m);
    t.semantic_scores.resize(static_cast<Eigen::Index>(m));
    for (std::size_t p = 0; p < m; ++p) {
        kernels::attention_forward(t.projected, in.adjacencies[p], params.node_att[p], hp.leaky_slope, policy,
                                   t.attention[p]);
        t.path_embeddings[p] = activate(hp.activation, t.attention[p].aggregated);
        t.semantic_hidden[p] = semantic_hidden(t.path_embeddings[p], params);
        t.semantic_scores(static_cast<Eigen::Index>(p)) = (t.semantic_hidden[p] * params.sem_q).mean();
    }
    t.path_weights = softmax(t.semantic_scores);
    t.fused = Matrix::Zero(in.features.rows(), hp.hidden);
    for (std::size_t p = 0; p < m; ++p) t.fused += t.path_weights(static_cast<Eigen::Index>(p)) * t.path_embeddings[p];
    t.logits = t.fused * params.clf_w.topRows(hp.hidden);
    t.logits.array() += params.clf_w(hp.hidden, 0);
    t.predictions = t.logits.unaryExpr([](double x) { return clamped_sigmoid(x); });
    return t;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// Backpropagates dL/dlogit (per node) plus an optional direct dL/dscore (per path)
// through the whole network, accumulating into grad.
void backward(const GraphInput& in, const ModelParams& params, const Hyperparams& hp, const ForwardTrace& t,
              const Vector& d_logit, const Vector* d_score_extra, Policy policy, ModelParams& grad) {
    const Eigen::Index n = in.features.rows(), d_h = hp.hidden;
    const std::size_t m = in.adjacencies.size();

    grad.clf_w.topRows(d_h) += t.fused.transpose() * d_logit;
    grad.clf_w(d_h, 0) += d_logit.sum();
    const Matrix d_fused = d_logit * params.clf_w.topRows(d_h).transpose();

    Vector d_weight(static_cast<Eigen::Index>(m));
    for (std::size_t p = 0; p < m; ++p)
        d_weight(static_cast<Eigen::Index>(p)) = d_fused.cwiseProduct(t.path_embeddings[p]).sum();
    Vector d_score = t.path_weights.cwiseProduct((d_weight.array() - t.path_weights.dot(d_weight)).matrix());
    if (d_score_extra) d_score += *d_score_extra;

    Matrix d_h_all = Matrix::Zero(n, d_h);
    for (std::size_t p = 0; p < m; ++p) {
        const auto pe = static_cast<Eigen::Index>(p);
        Matrix d_z = t.path_weights(pe) * d_fused;

        const double coef = d_score(pe) / static_cast<double>(n);
        if (coef != 0.0) {
            const Matrix& hidden = t.semantic_hidden[p];
            grad.sem_q.col(0) += coef * hidden.colwise().sum().transpose();
            Matrix d_pre = (1.0 - hidden.array().square()).matrix();
            d_pre.array().rowwise() *= (coef * params.sem_q.col(0)).transpose().array();
            grad.sem_w += d_pre.transpose() * t.path_embeddings[p];
            grad.sem_b.col(0) += d_pre.colwise().sum().transpose();
            d_z += d_pre * params.sem_w;
        }

        const Matrix& pre = t.attention[p].aggregated;
        const Matrix& post = t.path_embeddings[p];
        Matrix d_u(n, d_h);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < d_h; ++c)
                d_u(i, c) = d_z(i, c) * activation_derivative(hp.activation, pre(i, c), post(i, c));
        kernels::attention_backward(t.projected, in.adjacencies[p], params.node_att[p], hp.leaky_slope, policy,
                                    t.attention[p], d_u, d_h_all, grad.node_att[p]);
    }
    grad.proj += d_h_all.transpose() * in.features;
}

// dL/dlogit for one node's clamped cross-entropy; zero where the clamp is active.
double logit_gradient(double logit, int label) {
    const double p = sigmoid(logit);
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
    return p - static_cast<double>(label);
}

} // namespace

GradientResult compute_gradients(const GraphInput& in, const ModelParams& params, const Hyperparams& hp,
                                 const ForwardTrace& t, std::span<const int> labels, std::span<const int> labeled,
                                 std::span<const LossTerm* const> extra, Policy policy, double scale) {
    if (labeled.empty()) throw Error("no labeled nodes to train on");
    if (static_cast<Eigen::Index>(labels.size()) != in.features.rows()) throw DimensionError("label count mismatch");
    const Eigen::Index n = in.features.rows();

    GradientResult r;
    r.grad = ModelParams::zeros_like(params);
    Vector d_logit = Vector::Zero(n);
    const double inv = scale / static_cast<double>(labeled.size());
    double ce = 0.0;
    for (int i : labeled) {
        if (i < 0 || i >= n) throw DimensionError("labeled node index out of range");
        const double yhat = t.predictions(i);
        const double p = std::clamp(yhat, kProbabilityClamp, 1.0 - kProbabilityClamp);
        const int y = labels[static_cast<std::size_t>(i)];
        ce -= y == 1 ? std::log(p) : std::log1p(-p);
        d_logit(i) += inv * logit_gradient(t.logits(i), y);
    }
    r.data_loss = scale * ce / static_cast<double>(labeled.size());
    backward(in, params, hp, t, d_logit, nullptr, policy, r.grad);

    r.loss = r.data_loss;
    for (const LossTerm* term : extra) {
        r.loss += term->value(params);
        term->add_gradient(params, r.grad);
    }
    r.grad.check_finite("gradient");
    if (!std::isfinite(r.loss)) throw NumericError("loss", "objective is not finite");
    return r;
}

GradientResult compute_gradients(const GraphInput& in, const ModelParams& params, const Hyperparams& hp,
                                 std::span<const int> labels, std::span<const int> labeled,
                                 std::span<const LossTerm* const> extra, Policy policy, double scale) {
    const ForwardTrace t = forward(in, params, hp, policy);
    return compute_gradients(in, params, hp, t, labels, labeled, extra, policy, scale);
}

void per_node_gradients(const GraphInput& in, const ModelParams& params, const Hyperparams& hp, const ForwardTrace& t,
                        std::span<const int> labels, std::span<const int> nodes,
                        const std::function<void(int, const ModelParams&)>& visit, Policy policy, double scale) {
    const std::size_t m = in.adjacencies.size();
    const Eigen::Index n = in.features.rows(), d_h = hp.hidden;
    if (static_cast<Eigen::Index>(labels.size()) != n) throw DimensionError("label count mismatch");

    // Gradient of each semantic score w^P with respect to every parameter. A node's loss
    // reaches the shared path weights only through these scores.
    std::vector<ModelParams> score_grad(m, ModelParams::zeros_like(params));
    const Vector no_logit = Vector::Zero(n);
    for (std::size_t p = 0; p < m; ++p) {
        Vector e = Vector::Zero(static_cast<Eigen::Index>(m));
        e(static_cast<Eigen::Index>(p)) = 1.0;
        backward(in, params, hp, t, no_logit, &e, policy, score_grad[p]);
    }

    ModelParams g = ModelParams::zeros_like(params);
    Eigen::RowVectorXd d_u(d_h);
    for (int node : nodes) {
        if (node < 0 || node >= n) throw DimensionError("node index out of range");
        g.for_each([](const std::string&, Matrix& mtx) { mtx.setZero(); });
        const double r = scale * logit_gradient(t.logits(node), labels[static_cast<std::size_t>(node)]);

        g.clf_w.topRows(d_h) = r * t.fused.row(node).transpose();
        g.clf_w(d_h, 0) = r;
        const Eigen::RowVectorXd d_fused = r * params.clf_w.topRows(d_h).transpose();

        Vector d_weight(static_cast<Eigen::Index>(m));
        for (std::size_t p = 0; p < m; ++p) d_weight(static_cast<Eigen::Index>(p)) = d_fused.dot(t.path_embeddings[p].row(node));
        const Vector d_score = t.path_weights.cwiseProduct((d_weight.array() - t.path_weights.dot(d_weight)).matrix());

        for (std::size_t p = 0; p < m; ++p) {
            const double beta = t.path_weights(static_cast<Eigen::Index>(p));
            const auto pre = t.attention[p].aggregated.row(node);
            const auto post = t.path_embeddings[p].row(node);
            for (Eigen::Index c = 0; c < d_h; ++c)
                d_u(c) = beta * d_fused(c) * activation_derivative(hp.activation, pre(c), post(c));
            kernels::attention_node_backward(in.features, t.projected,
                                             in.adjacencies[p].neighbors[static_cast<std::size_t>(node)],
                                             params.node_att[p], hp.leaky_slope, t.attention[p],
                                             static_cast<std::size_t>(node), d_u, g.node_att[p], g.proj);
        }
        for (std::size_t p = 0; p < m; ++p) {
            const double c = d_score(static_cast<Eigen::Index>(p));
            if (c == 0.0) continue;
            g.proj += c * score_grad[p].proj;
            for (std::size_t q = 0; q < m; ++q) g.node_att[q] += c * score_grad[p].node_att[q];
            g.sem_w += c * score_grad[p].sem_w;
            g.sem_b += c * score_grad[p].sem_b;
            g.sem_q += c * score_grad[p].sem_q;
        }
        visit(node, g);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_params(const std::filesystem::path& path, const ModelParams& params) {
    NamedTensors tensors;
    params.for_each([&](const std::string& name, const Matrix& m) { tensors.emplace_back(name, m); });
    write_tensors(path, tensors);
}

ModelParams load_params(const std::filesystem::path& path) {
    const NamedTensors t = read_tensors(path);
    ModelParams p;
    p.proj = find_tensor(t, "proj");
    for (std::size_t i = 0;; ++i) {
        const std::string name = "node_att." + std::to_string(i);
        auto it = std::find_if(t.begin(), t.end(), [&](const auto& e) { return e.first == name; });
        if (it == t.end()) break;
        p.node_att.push_back(it->second);
    }
    p.sem_w = find_tensor(t, "sem_w");
    p.sem_b = find_tensor(t, "sem_b");
    p.sem_q = find_tensor(t, "sem_q");
    p.clf_w = find_tensor(t, "clf_w");
    return p;
}

} // namespace tradegraph
