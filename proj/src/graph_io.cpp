#include "tradegraph/csv.hpp"
#include "tradegraph/htg.hpp"

#include <fstream>

namespace tradegraph {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    return out;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    return in;
}

std::vector<std::vector<std::string>> read_table(const fs::path& p, std::size_t expected_columns) {
    auto in = open_in(p);
    std::size_t line = 0;
    auto header = csv::read_record(in, line);
    if (!header) throw SchemaError(p.string() + ": missing header");
    if (expected_columns && header->size() != expected_columns)
        throw SchemaError(p.string() + ": unexpected column count");
    std::vector<std::vector<std::string>> rows;
    while (auto row = csv::read_record(in, line)) {
        if (row->size() != header->size()) throw RowError(line, p.string() + ": wrong field count");
        rows.push_back(std::move(*row));
    }
    return rows;
}

int to_int(const std::string& s, const fs::path& p) {
    auto v = csv::parse_int(s);
    if (!v) throw SchemaError(p.string() + ": bad integer '" + s + "'");
    return static_cast<int>(*v);
}

void write_names(const fs::path& p, const std::vector<std::string>& names) {
    auto out = open_out(p);
    out << "index,id\n";
    for (std::size_t i = 0; i < names.size(); ++i) csv::write_record(out, {std::to_string(i), names[i]});
}

std::vector<std::string> read_names(const fs::path& p) {
    auto rows = read_table(p, 2);
    std::vector<std::string> names;
    names.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (to_int(rows[i][0], p) != static_cast<int>(i)) throw SchemaError(p.string() + ": indices must be 0..n-1 in order");
        names.push_back(rows[i][1]);
    }
    return names;
}

void write_edges(const fs::path& p, NodeType target, const std::vector<int>& endpoint) {
    auto out = open_out(p);
    out << "transaction," << to_string(target) << '\n';
    for (std::size_t i = 0; i < endpoint.size(); ++i) out << i << ',' << endpoint[i] << '\n';
}

std::vector<int> read_edges(const fs::path& p, std::size_t n) {
    auto rows = read_table(p, 2);
    if (rows.size() != n) throw SchemaError(p.string() + ": expected one edge per transaction");
    std::vector<int> endpoint(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (to_int(rows[i][0], p) != static_cast<int>(i)) throw SchemaError(p.string() + ": edges must be in transaction order");
        endpoint[i] = to_int(rows[i][1], p);
    }
    return endpoint;
}

} // namespace

void save_graph(const fs::path& dir, const HeteroTradeGraph& g) {
    g.validate();
    fs::create_directories(dir);
    write_names(dir / "nodes_transaction.csv", g.txn_ids);
    write_names(dir / "nodes_card_holder.csv", g.card_holders);
    write_names(dir / "nodes_merchant.csv", g.merchants);
    {
        auto out = open_out(dir / "nodes_time_slice.csv");
        out << "index,hour\n";
        for (std::size_t i = 0; i < g.time_slices.size(); ++i) out << i << ',' << g.time_slices[i] << '\n';
    }
    write_edges(dir / "edges_transaction_card_holder.csv", NodeType::card_holder, g.txn_card_holder);
    write_edges(dir / "edges_transaction_merchant.csv", NodeType::merchant, g.txn_merchant);
    write_edges(dir / "edges_transaction_time_slice.csv", NodeType::time_slice, g.txn_time_slice);
    {
        auto out = open_out(dir / "features.csv");
        for (Eigen::Index c = 0; c < g.features.cols(); ++c) out << (c ? "," : "") << 'f' << c;
        out << '\n';
        for (Eigen::Index r = 0; r < g.features.rows(); ++r) {
            for (Eigen::Index c = 0; c < g.features.cols(); ++c) out << (c ? "," : "") << csv::format_double(g.features(r, c));
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "labels.csv");
        out << "label\n";
        for (int y : g.labels) out << y << '\n';
    }
}

HeteroTradeGraph load_graph(const fs::path& dir) {
    HeteroTradeGraph g;
    g.txn_ids = read_names(dir / "nodes_transaction.csv");
    g.card_holders = read_names(dir / "nodes_card_holder.csv");
    g.merchants = read_names(dir / "nodes_merchant.csv");
    {
        const auto p = dir / "nodes_time_slice.csv";
        for (const auto& row : read_table(p, 2)) g.time_slices.push_back(to_int(row[1], p));
    }
    const std::size_t n = g.txn_ids.size();
    g.txn_card_holder = read_edges(dir / "edges_transaction_card_holder.csv", n);
    g.txn_merchant = read_edges(dir / "edges_transaction_merchant.csv", n);
    g.txn_time_slice = read_edges(dir / "edges_transaction_time_slice.csv", n);
    {
        const auto p = dir / "features.csv";
        auto in = open_in(p);
        std::size_t line = 0;
        auto header = csv::read_record(in, line);
        if (!header) throw SchemaError(p.string() + ": missing header");
        const auto d = static_cast<Eigen::Index>(header->size());
        g.features.resize(static_cast<Eigen::Index>(n), d);
        Eigen::Index r = 0;
        while (auto row = csv::read_record(in, line)) {
            if (r >= static_cast<Eigen::Index>(n) || static_cast<Eigen::Index>(row->size()) != d)
                throw RowError(line, p.string() + ": feature table shape mismatch");
            for (Eigen::Index c = 0; c < d; ++c) {
                auto v = csv::parse_double((*row)[static_cast<std::size_t>(c)]);
                if (!v) throw RowError(line, p.string() + ": bad number");
                g.features(r, c) = *v;
            }
            ++r;
        }
        if (r != static_cast<Eigen::Index>(n)) throw SchemaError(p.string() + ": expected one feature row per transaction");
    }
    {
        const auto p = dir / "labels.csv";
        for (const auto& row : read_table(p, 1)) g.labels.push_back(to_int(row[0], p));
    }
    g.validate();
    return g;
}

} // namespace tradegraph
