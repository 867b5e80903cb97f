#include "support.hpp"

#include <doctest.h>

using namespace tradegraph;
using namespace tradegraph::kernels;

namespace {

struct Case {
    HeteroTradeGraph graph;
    std::vector<MetaPathAdjacency> adjs;
};

Case random_case(std::mt19937_64& rng, int n) {
    Case c;
    c.graph = build_htg(support::random_dataset(rng, n, 1 + static_cast<int>(rng() % 8), 1 + static_cast<int>(rng() % 8)));
    const auto specs = default_metapaths();
    c.adjs = extract_metapaths(c.graph, specs);
    return c;
}

void require_close(const Matrix& a, const Matrix& b, double tol) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    CHECK((a - b).cwiseAbs().maxCoeff() <= tol * scale);
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("grouped forward and backward match the reference") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        std::mt19937_64 rng(seed);
        const int n = 2 + static_cast<int>(rng() % 120);
        const Case c = random_case(rng, n);
        const int heads = 1 + static_cast<int>(rng() % 3), w = 1 + static_cast<int>(rng() % 4);
        const double scale = seed % 5 == 0 ? 8.0 : 1.0;
        const double slope = seed % 3 == 0 ? 0.0 : 0.2;
        Matrix h = support::random_matrix(rng, n, heads * w, scale);
        if (seed % 4 == 0) h.row(n - 1) = h.row(0); // tied scores
        const Matrix att = support::random_matrix(rng, heads, 2 * w, scale);
        const Matrix d_u = support::random_matrix(rng, n, heads * w);

        for (const auto& adj : c.adjs) {
            AttentionState ref, grp;
            attention_forward_reference(h, adj.neighbors, att, slope, ref);
            attention_forward_grouped(h, adj.groups, att, slope, grp);
            require_close(grp.aggregated, ref.aggregated, 1e-10);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < heads; ++k)
                    for (int j : adj.neighbors[static_cast<std::size_t>(i)])
                        CHECK(attention_coefficient(grp, k, static_cast<std::size_t>(i), static_cast<std::size_t>(j), slope) ==
                              doctest::Approx(attention_coefficient(ref, k, static_cast<std::size_t>(i), static_cast<std::size_t>(j), slope)).epsilon(1e-10));

            Matrix dh_ref = Matrix::Zero(n, h.cols()), dh_grp = dh_ref;
            Matrix da_ref = Matrix::Zero(heads, 2 * w), da_grp = da_ref;
            attention_backward_reference(h, adj.neighbors, att, slope, ref, d_u, dh_ref, da_ref);
            attention_backward_grouped(h, adj.groups, att, slope, grp, d_u, dh_grp, da_grp);
            require_close(dh_grp, dh_ref, 1e-9);
            require_close(da_grp, da_ref, 1e-9);
        }
    }
}

TEST_CASE("dispatch falls back to the reference without groups") {
    std::mt19937_64 rng(2);
    const auto lists = support::random_lists(rng, 12, 0.3);
    const auto adj = adjacency_from_lists("random", lists);
    const Matrix h = support::random_matrix(rng, 12, 4), att = support::random_matrix(rng, 2, 4);
    AttentionState a, b;
    attention_forward(h, adj, att, 0.2, Policy::parallel, a);
    attention_forward_reference(h, adj.neighbors, att, 0.2, b);
    CHECK(a.aggregated == b.aggregated);
}

TEST_CASE("attention rows are a probability simplex") {
    std::mt19937_64 rng(8);
    const auto adj = adjacency_from_lists("random", support::random_lists(rng, 20, 0.25));
    const Matrix h = support::random_matrix(rng, 20, 6, 3.0), att = support::random_matrix(rng, 3, 4, 3.0);
    AttentionState st;
    attention_forward_reference(h, adj.neighbors, att, 0.2, st);
    for (std::size_t i = 0; i < 20; ++i)
        for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (int j : adj.neighbors[i]) {
                const double a = attention_coefficient(st, k, i, static_cast<std::size_t>(j), 0.2);
                CHECK(a >= 0.0);
                s += a;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("single-node backward matches the full backward restricted to one row") {
    std::mt19937_64 rng(13);
    const int n = 25, d_in = 3, heads = 2, w = 3;
    const auto adj = adjacency_from_lists("random", support::random_lists(rng, n, 0.2));
    const Matrix x = support::random_matrix(rng, n, d_in);
    const Matrix proj = support::random_matrix(rng, heads * w, d_in);
    const Matrix h = x * proj.transpose();
    const Matrix att = support::random_matrix(rng, heads, 2 * w);
    AttentionState st;
    attention_forward_reference(h, adj.neighbors, att, 0.2, st);

    for (int node : {0, 7, 24}) {
        Matrix d_u = Matrix::Zero(n, heads * w);
        d_u.row(node) = support::random_matrix(rng, 1, heads * w);
        Matrix dh = Matrix::Zero(n, heads * w), da = Matrix::Zero(heads, 2 * w);
        attention_backward_reference(h, adj.neighbors, att, 0.2, st, d_u, dh, da);
        const Matrix d_proj_full = dh.transpose() * x;

        Matrix da_node = Matrix::Zero(heads, 2 * w), d_proj = Matrix::Zero(heads * w, d_in);
        attention_node_backward(x, h, adj.neighbors[static_cast<std::size_t>(node)], att, 0.2, st,
                                static_cast<std::size_t>(node), d_u.row(node), da_node, d_proj);
        require_close(da_node, da, 1e-12);
        require_close(d_proj, d_proj_full, 1e-12);
    }
}

TEST_CASE("shape errors") {
    Matrix h = Matrix::Zero(3, 5), att = Matrix::Zero(2, 4);
    AttentionState st;
    CHECK_THROWS_AS(attention_scores(h, att, st), DimensionError);
    CHECK_THROWS(attention_forward_reference(Matrix::Zero(2, 4), {{0}, {}}, Matrix::Zero(2, 4), 0.2, st));
}

} // TEST_SUITE
