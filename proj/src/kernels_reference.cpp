#include "tradegraph/kernels.hpp"

#include <cmath>
#include <limits>

namespace tradegraph::kernels {

namespace {

void check_shapes(const Matrix& h, const Matrix& att) {
    const auto heads = att.rows();
    if (heads <= 0 || h.cols() % heads != 0 || att.cols() != 2 * (h.cols() / heads))
        throw DimensionError("attention parameters do not match the hidden width");
}

} // namespace

void attention_scores(const Matrix& h, const Matrix& att, AttentionState& out, bool parallel) {
    check_shapes(h, att);
    const Eigen::Index n = h.rows(), heads = att.rows(), w = h.cols() / heads;
    out.src.resize(n, heads);
    out.dst.resize(n, heads);
#pragma omp parallel for schedule(static) if (parallel)
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < heads; ++k) {
            const auto hi = h.row(i).segment(k * w, w);
            out.src(i, k) = hi.dot(att.row(k).head(w));
            out.dst(i, k) = hi.dot(att.row(k).tail(w));
        }
    }
}

double attention_coefficient(const AttentionState& s, int head, std::size_t i, std::size_t j, double slope) {
    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    const double e = leaky_relu(s.src(ii, head) + s.dst(jj, head), slope);
    return std::exp(e - s.max_logit(ii, head)) / s.normalizer(ii, head);
}

void attention_forward_reference(const Matrix& h, const std::vector<std::vector<int>>& neighbors, const Matrix& att,
                                 double slope, AttentionState& out) {
    attention_scores(h, att, out);
    const Eigen::Index n = h.rows(), heads = att.rows(), w = h.cols() / heads;
    if (static_cast<Eigen::Index>(neighbors.size()) != n) throw DimensionError("adjacency does not match node count");
    out.max_logit.resize(n, heads);
    out.normalizer.resize(n, heads);
    out.aggregated.setZero(n, h.cols());

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& nbrs = neighbors[static_cast<std::size_t>(i)];
        if (nbrs.empty()) throw Error("empty neighborhood for node " + std::to_string(i));
        for (Eigen::Index k = 0; k < heads; ++k) {
            double m = -std::numeric_limits<double>::infinity();
            for (int j : nbrs) m = std::max(m, leaky_relu(out.src(i, k) + out.dst(j, k), slope));
            double z = 0.0;
            auto u = out.aggregated.row(i).segment(k * w, w);
            for (int j : nbrs) {
                const double a = std::exp(leaky_relu(out.src(i, k) + out.dst(j, k), slope) - m);
                z += a;
                u += a * h.row(j).segment(k * w, w);
            }
            u /= z;
            out.max_logit(i, k) = m;
            out.normalizer(i, k) = z;
        }
    }
}

void attention_backward_reference(const Matrix& h, const std::vector<std::vector<int>>& neighbors, const Matrix& att,
                                  double slope, const AttentionState& s, const Matrix& d_u, Matrix& d_h, Matrix& d_att) {
    const Eigen::Index n = h.rows(), heads = att.rows(), w = h.cols() / heads;
    Matrix d_src = Matrix::Zero(n, heads);
    Matrix d_dst = Matrix::Zero(n, heads);

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < heads; ++k) {
            const auto du = d_u.row(i).segment(k * w, w);
            const double total = du.dot(s.aggregated.row(i).segment(k * w, w));
            for (int j : neighbors[static_cast<std::size_t>(i)]) {
                const double pre = s.src(i, k) + s.dst(j, k);
                const double alpha = std::exp(leaky_relu(pre, slope) - s.max_logit(i, k)) / s.normalizer(i, k);
                const auto hj = h.row(j).segment(k * w, w);
                const double d_pre = alpha * (du.dot(hj) - total) * (pre > 0.0 ? 1.0 : slope);
                d_src(i, k) += d_pre;
                d_dst(j, k) += d_pre;
                d_h.row(j).segment(k * w, w) += alpha * du;
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < heads; ++k) {
            const auto hi = h.row(i).segment(k * w, w);
            d_att.row(k).head(w) += d_src(i, k) * hi;
            d_att.row(k).tail(w) += d_dst(i, k) * hi;
            d_h.row(i).segment(k * w, w) += d_src(i, k) * att.row(k).head(w) + d_dst(i, k) * att.row(k).tail(w);
        }
    }
}

void attention_node_backward(const Matrix& x, const Matrix& h, const std::vector<int>& nbrs, const Matrix& att,
                             double slope, const AttentionState& s, std::size_t node,
                             const Eigen::Ref<const Eigen::RowVectorXd>& d_u_row, Matrix& d_att, Matrix& d_proj) {
    const Eigen::Index heads = att.rows(), w = h.cols() / heads, d_in = x.cols();
    const auto i = static_cast<Eigen::Index>(node);
    Eigen::RowVectorXd weighted_x(d_in), dpre_x(d_in);
    Eigen::RowVectorXd dpre_h(w);
    for (Eigen::Index k = 0; k < heads; ++k) {
        const auto du = d_u_row.segment(k * w, w);
        const double total = du.dot(s.aggregated.row(i).segment(k * w, w));
        weighted_x.setZero();
        dpre_x.setZero();
        dpre_h.setZero();
        double d_src = 0.0;
        for (int j : nbrs) {
            const double pre = s.src(i, k) + s.dst(j, k);
            const double alpha = std::exp(leaky_relu(pre, slope) - s.max_logit(i, k)) / s.normalizer(i, k);
            const auto hj = h.row(j).segment(k * w, w);
            const double d_pre = alpha * (du.dot(hj) - total) * (pre > 0.0 ? 1.0 : slope);
            d_src += d_pre;
            weighted_x += alpha * x.row(j);
            dpre_x += d_pre * x.row(j);
            dpre_h += d_pre * hj;
        }
        const auto a_src = att.row(k).head(w);
        const auto a_dst = att.row(k).tail(w);
        d_att.row(k).head(w) += d_src * h.row(i).segment(k * w, w);
        d_att.row(k).tail(w) += dpre_h;
        // dh_j = alpha_ij du + d_pre_ij a_dst for each neighbor, plus d_src a_src on i itself.
        d_proj.middleRows(k * w, w).noalias() += du.transpose() * weighted_x;
        d_proj.middleRows(k * w, w).noalias() += a_dst.transpose() * dpre_x;
        d_proj.middleRows(k * w, w).noalias() += (d_src * a_src.transpose()) * x.row(i);
    }
}

void attention_forward(const Matrix& h, const MetaPathAdjacency& adj, const Matrix& att, double slope, Policy policy,
                       AttentionState& out) {
    if (policy == Policy::parallel && adj.grouped())
        attention_forward_grouped(h, adj.groups, att, slope, out);
    else
        attention_forward_reference(h, adj.neighbors, att, slope, out);
}

void attention_backward(const Matrix& h, const MetaPathAdjacency& adj, const Matrix& att, double slope, Policy policy,
                        const AttentionState& state, const Matrix& d_u, Matrix& d_h, Matrix& d_att) {
    if (policy == Policy::parallel && adj.grouped())
        attention_backward_grouped(h, adj.groups, att, slope, state, d_u, d_h, d_att);
    else
        attention_backward_reference(h, adj.neighbors, att, slope, state, d_u, d_h, d_att);
}

} // namespace tradegraph::kernels
