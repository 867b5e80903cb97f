#pragma once

#include "tradegraph/data.hpp"
#include "tradegraph/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tradegraph {

/// `key = value` lines; `#` starts a comment. Keys are unique within a file.
class ConfigFile {
public:
    static ConfigFile parse(std::istream& in, const std::string& source = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Everything a command needs, with defaults filled in.
struct RunConfig {
    SyntheticConfig synth;
    TrainConfig train;
    std::vector<std::filesystem::path> data; // one CSV per region; empty means synthesize
    std::vector<int> region_ids;             // defaults to 1..n
    std::string out;                         // output directory as configured

    /// Every key with its effective value; parsing this back yields the same RunConfig.
    std::map<std::string, std::string> resolved() const;
};

/// Throws ConfigError naming the key for unknown keys and malformed or invalid values.
RunConfig resolve_config(const ConfigFile& file);

/// Known keys, sorted.
std::vector<std::string> config_keys();

} // namespace tradegraph
