#include "tradegraph/tensor_io.hpp"

#include "tradegraph/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace tradegraph {

namespace {
constexpr const char* kMagic = "tradegraph-tensors";
constexpr int kVersion = 1;
} // namespace

void write_tensors(std::ostream& out, const NamedTensors& tensors) {
    out << kMagic << ' ' << kVersion << '\n' << tensors.size() << '\n';
    for (const auto& [name, m] : tensors) {
        if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
            throw Error("tensor name '" + name + "' must be non-empty without whitespace");
        out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << csv::format_double(m(r, c));
            out << '\n';
        }
    }
}

NamedTensors read_tensors(std::istream& in) {
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    if (!(in >> magic >> version >> count) || magic != kMagic || version != kVersion)
        throw IoError("not a tensor checkpoint (bad header)");
    NamedTensors out;
    out.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) throw IoError("truncated tensor header");
        Matrix m(rows, cols);
        std::string token;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (!(in >> token)) throw IoError("truncated values for tensor '" + name + "'");
                auto v = csv::parse_double(token);
                if (!v) throw IoError("bad value '" + token + "' in tensor '" + name + "'");
                m(r, c) = *v;
            }
        out.emplace_back(std::move(name), std::move(m));
    }
    return out;
}

void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_tensors(out, tensors);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

NamedTensors read_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return read_tensors(in);
}

const Matrix& find_tensor(const NamedTensors& tensors, const std::string& name) {
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    throw Error("checkpoint has no tensor '" + name + "'");
}

} // namespace tradegraph
