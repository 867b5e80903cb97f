#include "tradegraph/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tradegraph::kernels {

namespace {

// Members of one group for one head, sorted by destination score, with the
// running sums that make every node's softmax a prefix/suffix lookup.
//   p_t = exp(R_t - Rmax), q_t = exp(slope (R_t - Rmax)), both in (0, 1].
//   suffix_p[t] = sum_{t' >= t} p,   suffix_ph[t] = sum_{t' >= t} p h
//   prefix_q[t] = sum_{t' < t} q,    prefix_qh[t] = sum_{t' < t} q h
struct SortedGroup {
    std::vector<int> order;
    std::vector<double> sorted_dst;
    std::vector<double> suffix_p, prefix_q;
    Matrix suffix_ph, prefix_qh; // (n+1) x w
    double max_dst = 0.0;

    void build(const Matrix& h, const std::vector<int>& members, const Matrix& dst, Eigen::Index k, Eigen::Index w,
               double slope) {
        const std::size_t n = members.size();
        order = members;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dst(a, k) < dst(b, k); });
        sorted_dst.resize(n);
        for (std::size_t t = 0; t < n; ++t) sorted_dst[t] = dst(order[t], k);
        max_dst = sorted_dst.back();

        suffix_p.assign(n + 1, 0.0);
        prefix_q.assign(n + 1, 0.0);
        suffix_ph.setZero(static_cast<Eigen::Index>(n + 1), w);
        prefix_qh.setZero(static_cast<Eigen::Index>(n + 1), w);
        for (std::size_t t = n; t-- > 0;) {
            const double p = std::exp(sorted_dst[t] - max_dst);
            const auto tt = static_cast<Eigen::Index>(t);
            suffix_p[t] = suffix_p[t + 1] + p;
            suffix_ph.row(tt) = suffix_ph.row(tt + 1) + p * h.row(order[t]).segment(k * w, w);
        }
        for (std::size_t t = 0; t < n; ++t) {
            const double q = std::exp(slope * (sorted_dst[t] - max_dst));
            const auto tt = static_cast<Eigen::Index>(t);
            prefix_q[t + 1] = prefix_q[t] + q;
            prefix_qh.row(tt + 1) = prefix_qh.row(tt) + q * h.row(order[t]).segment(k * w, w);
        }
    }

    /// First sorted position whose destination score lies on the positive side of the kink for source score L.
    std::size_t split(double src) const {
        return static_cast<std::size_t>(std::upper_bound(sorted_dst.begin(), sorted_dst.end(), -src) - sorted_dst.begin());
    }
};

struct NodeSoftmax {
    std::size_t cut;  // members [cut, n) are on the linear side of the kink
    double neg_scale; // exp(slope (L + Rmax) - m) applied to the q terms
    double max_logit;
};

NodeSoftmax node_softmax(const SortedGroup& g, double src, double slope) {
    const std::size_t n = g.sorted_dst.size();
    NodeSoftmax s{};
    s.cut = g.split(src);
    const double top = src + g.max_dst;
    if (s.cut < n) {
        s.max_logit = top;
        s.neg_scale = std::exp((slope - 1.0) * top);
    } else {
        s.max_logit = slope * top;
        s.neg_scale = 1.0;
    }
    return s;
}

} // namespace

void attention_forward_grouped(const Matrix& h, const std::vector<std::vector<int>>& groups, const Matrix& att,
                               double slope, AttentionState& out) {
    attention_scores(h, att, out, /*parallel=*/true);
    const Eigen::Index n = h.rows(), heads = att.rows(), w = h.cols() / heads;
    out.max_logit.resize(n, heads);
    out.normalizer.resize(n, heads);
    out.aggregated.resize(n, h.cols());

#pragma omp parallel
    {
        SortedGroup sg;
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(groups.size()); ++gi) {
            const auto& members = groups[static_cast<std::size_t>(gi)];
            for (Eigen::Index k = 0; k < heads; ++k) {
                sg.build(h, members, out.dst, k, w, slope);
                for (int i : members) {
                    const auto s = node_softmax(sg, out.src(i, k), slope);
                    const auto c = static_cast<Eigen::Index>(s.cut);
                    const double z = sg.suffix_p[s.cut] + s.neg_scale * sg.prefix_q[s.cut];
                    out.aggregated.row(i).segment(k * w, w) =
                        (sg.suffix_ph.row(c) + s.neg_scale * sg.prefix_qh.row(c)) / z;
                    out.max_logit(i, k) = s.max_logit;
                    out.normalizer(i, k) = z;
                }
            }
        }
    }
}

void attention_backward_grouped(const Matrix& h, const std::vector<std::vector<int>>& groups, const Matrix& att,
                                double slope, const AttentionState& st, const Matrix& d_u, Matrix& d_h, Matrix& d_att) {
    const Eigen::Index heads = att.rows(), w = h.cols() / heads;
    // One partial per group keeps the reduction order fixed regardless of thread count.
    std::vector<Matrix> partial(groups.size());

#pragma omp parallel
    {
        SortedGroup sg;
        std::vector<int> by_src;
        std::vector<double> sorted_src, suffix_b, prefix_d, d_src;
        std::vector<NodeSoftmax> soft;
        Matrix suffix_a, prefix_c;
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(groups.size()); ++gi) {
            const auto& members = groups[static_cast<std::size_t>(gi)];
            const std::size_t n = members.size();
            Matrix& part = partial[static_cast<std::size_t>(gi)];
            part.setZero(heads, 2 * w);

            for (Eigen::Index k = 0; k < heads; ++k) {
                sg.build(h, members, st.dst, k, w, slope);
                soft.resize(n);
                d_src.resize(n);
                // Source-side gradient: dL/dsrc_i = sum_j alpha_ij (du_i.h_j - du_i.u_i) LeakyReLU'.
                for (std::size_t t = 0; t < n; ++t) {
                    const int i = members[t];
                    soft[t] = node_softmax(sg, st.src(i, k), slope);
                    const auto c = static_cast<Eigen::Index>(soft[t].cut);
                    const auto du = d_u.row(i).segment(k * w, w);
                    const double z = st.normalizer(i, k);
                    const double total = du.dot(st.aggregated.row(i).segment(k * w, w));
                    const double pos = du.dot(sg.suffix_ph.row(c)) - total * sg.suffix_p[soft[t].cut];
                    const double neg = du.dot(sg.prefix_qh.row(c)) - total * sg.prefix_q[soft[t].cut];
                    d_src[t] = (pos + slope * soft[t].neg_scale * neg) / z;
                }

                // Destination side: j is on the linear side for source i iff src_i > -dst_j,
                // a suffix of the members sorted by source score.
                by_src.resize(n);
                std::iota(by_src.begin(), by_src.end(), 0);
                std::stable_sort(by_src.begin(), by_src.end(),
                                 [&](int a, int b) { return st.src(members[a], k) < st.src(members[b], k); });
                sorted_src.resize(n);
                suffix_b.assign(n + 1, 0.0);
                prefix_d.assign(n + 1, 0.0);
                suffix_a.setZero(static_cast<Eigen::Index>(n + 1), w);
                prefix_c.setZero(static_cast<Eigen::Index>(n + 1), w);
                for (std::size_t t = 0; t < n; ++t) sorted_src[t] = st.src(members[by_src[t]], k);
                for (std::size_t t = n; t-- > 0;) {
                    const int local = by_src[t];
                    const int i = members[local];
                    const double z = st.normalizer(i, k);
                    const auto du = d_u.row(i).segment(k * w, w);
                    const double total = du.dot(st.aggregated.row(i).segment(k * w, w));
                    const auto tt = static_cast<Eigen::Index>(t);
                    suffix_a.row(tt) = suffix_a.row(tt + 1) + du / z;
                    suffix_b[t] = suffix_b[t + 1] + total / z;
                }
                for (std::size_t t = 0; t < n; ++t) {
                    const int local = by_src[t];
                    const int i = members[local];
                    const double scale = soft[static_cast<std::size_t>(local)].neg_scale / st.normalizer(i, k);
                    const auto du = d_u.row(i).segment(k * w, w);
                    const double total = du.dot(st.aggregated.row(i).segment(k * w, w));
                    const auto tt = static_cast<Eigen::Index>(t);
                    prefix_c.row(tt + 1) = prefix_c.row(tt) + scale * du;
                    prefix_d[t + 1] = prefix_d[t] + scale * total;
                }

                const auto a_src = att.row(k).head(w);
                const auto a_dst = att.row(k).tail(w);
                for (std::size_t t = 0; t < n; ++t) {
                    const int j = members[t];
                    const double r = st.dst(j, k);
                    const auto cut = static_cast<std::size_t>(
                        std::upper_bound(sorted_src.begin(), sorted_src.end(), -r) - sorted_src.begin());
                    const auto c = static_cast<Eigen::Index>(cut);
                    const double p = std::exp(r - sg.max_dst);
                    const double q = std::exp(slope * (r - sg.max_dst));
                    const auto hj = h.row(j).segment(k * w, w);

                    const Eigen::RowVectorXd agg = p * suffix_a.row(c) + q * prefix_c.row(c);
                    const double d_dst = hj.dot(p * suffix_a.row(c) + slope * q * prefix_c.row(c)) -
                                         (p * suffix_b[cut] + slope * q * prefix_d[cut]);
                    d_h.row(j).segment(k * w, w) += agg + d_src[t] * a_src + d_dst * a_dst;
                    part.row(k).head(w) += d_src[t] * hj;
                    part.row(k).tail(w) += d_dst * hj;
                }
            }
        }
    }
    for (const auto& p : partial) d_att += p;
}

} // namespace tradegraph::kernels
