#pragma once

#include "tradegraph/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace tradegraph {

/// Ordered (name, tensor) list. The file format is text:
///
///   tradegraph-tensors 1
///   <count>
///   <name> <rows> <cols>
///   <row-major values, one matrix row per line>
///   ...
///
/// Values use the shortest decimal form that parses back to the same double, so a
/// save/load cycle is bit-exact.
using NamedTensors = std::vector<std::pair<std::string, Matrix>>;

void write_tensors(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_tensors(std::istream& in);
void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_tensors(const std::filesystem::path& path);

/// Looks a tensor up by name; throws Error when absent.
const Matrix& find_tensor(const NamedTensors& tensors, const std::string& name);

} // namespace tradegraph
