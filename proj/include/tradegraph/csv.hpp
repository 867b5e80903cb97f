#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tradegraph::csv {

/// Reads one logical record (quoted fields may span lines). Returns nullopt at EOF.
/// `line` is advanced by the number of physical lines consumed.
std::optional<std::vector<std::string>> read_record(std::istream& in, std::size_t& line);

std::string escape(std::string_view field);
void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
/// Strict parse: whole string must be consumed.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

} // namespace tradegraph::csv
