#pragma once

#include "tradegraph/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tradegraph {

/// Environment variable naming the directory that relative output paths resolve against.
inline constexpr const char* kOutputRootEnv = "TRADEGRAPH_OUTPUT_ROOT";

struct CommandOptions {
    std::string command; // synth, build-graph, single, sequence, report
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> manifest;
    std::map<std::string, std::string> overrides; // applied over the config or manifest
    std::vector<std::filesystem::path> run_dirs;  // report inputs
};

/// Runs one command. Writes `manifest.json` into the output directory before the run
/// (status "running") and rewrites it when the run completes. Returns the output directory.
std::filesystem::path run_command(const CommandOptions& options, std::ostream& log);

/// Where a command writes: the configured `out`, else runs/<command>, made relative to
/// the output-root variable when that is set.
std::filesystem::path resolve_output_dir(const std::string& configured, const std::string& command);

} // namespace tradegraph
