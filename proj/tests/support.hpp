#pragma once

// Independent oracles and small fixtures shared by the unit and acceptance tests.

#include "tradegraph/continual.hpp"
#include "tradegraph/data.hpp"
#include "tradegraph/htg.hpp"
#include "tradegraph/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace support {

using namespace tradegraph;

/// Dataset with `n` transactions over `cards` card holders and `merchants` merchants.
inline Dataset random_dataset(std::mt19937_64& rng, int n, int cards, int merchants, double fraud_rate = 0.3) {
    std::uniform_int_distribution<int> card(0, cards - 1), merch(0, merchants - 1), hour(0, 23), minute(0, 59);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset ds;
    for (int i = 0; i < n; ++i) {
        TransactionRecord r;
        r.txn_id = "t" + std::to_string(i);
        r.card_holder_id = "c" + std::to_string(card(rng));
        r.merchant_id = "m" + std::to_string(merch(rng));
        r.timestamp = Timestamp{2020, 1, 1 + i % 28, hour(rng), minute(rng), 0};
        r.amount = std::round(100.0 * (1.0 + 50.0 * unit(rng))) / 100.0;
        r.category = "cat" + std::to_string(i % 5);
        r.latitude = 35.0;
        r.longitude = -97.0;
        r.label = unit(rng) < fraud_rate ? 1 : 0;
        for (auto& s : r.signals) s = normal(rng);
        ds.records.push_back(r);
    }
    return ds;
}

/// Two-hop neighbors by a double loop over transaction pairs.
inline std::vector<std::vector<int>> brute_force_neighbors(const HeteroTradeGraph& g, NodeType via) {
    const std::size_t n = g.num_transactions();
    std::vector<std::vector<int>> out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i == j || g.entity_of(i, via) == g.entity_of(j, via)) out[i].push_back(static_cast<int>(j));
    return out;
}

/// AUC by counting concordant fraud/legit pairs, ties counted as half.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                den += 1.0;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / den;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

/// Random neighbor lists that always contain the node itself.
inline std::vector<std::vector<int>> random_lists(std::mt19937_64& rng, int n, double p) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i == j || unit(rng) < p) lists[static_cast<std::size_t>(i)].push_back(j);
    return lists;
}

inline ModelParams random_params(std::mt19937_64& rng, const Hyperparams& hp, std::size_t d_in, std::size_t paths,
                                 double scale = 0.5) {
    ModelParams p = ModelParams::init(hp, d_in, paths, rng());
    p.for_each([&](const std::string&, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), scale); });
    return p;
}

/// Central differences of f at every parameter entry.
inline Vector numeric_gradient(const ModelParams& at, const std::function<double(const ModelParams&)>& f, double step) {
    Vector flat = at.flatten();
    Vector grad(flat.size());
    ModelParams probe = at;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        const double orig = flat(i);
        flat(i) = orig + step;
        probe.unflatten(flat);
        const double up = f(probe);
        flat(i) = orig - step;
        probe.unflatten(flat);
        const double down = f(probe);
        flat(i) = orig;
        grad(i) = (up - down) / (2.0 * step);
    }
    return grad;
}

/// Largest |a - n| / max(|a|, |n|, floor) over entries.
inline double max_relative_error(const Vector& analytic, const Vector& numeric, double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double a = analytic(i), n = numeric(i);
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
    }
    return worst;
}

/// max |a - b| relative to the largest |b|; for comparing two exact computations.
inline double scaled_error(const Vector& a, const Vector& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("tradegraph_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

struct Exec {
    int status = -1;
    std::string output;
};

/// Runs a shell command, capturing stdout and stderr together.
inline Exec run(const std::string& cmd) {
    Exec e;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return e;
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe)) e.output += buf;
    const int raw = pclose(pipe);
    e.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return e;
}

} // namespace support
