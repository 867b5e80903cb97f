#include "tradegraph/config.hpp"

#include "tradegraph/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace tradegraph {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
std::string join(const T& items) {
    std::string out;
    for (const auto& x : items) {
        if (!out.empty()) out += ",";
        if constexpr (std::is_convertible_v<decltype(x), std::string>)
            out += x;
        else
            out += std::to_string(x);
    }
    return out;
}

double as_double(const std::string& key, const std::string& v) {
    const auto d = csv::parse_double(v);
    if (!d) throw ConfigError(key, "expected a number, got '" + v + "'");
    return *d;
}

long long as_int(const std::string& key, const std::string& v) {
    const auto i = csv::parse_int(v);
    if (!i) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return *i;
}

int as_int32(const std::string& key, const std::string& v) {
    const long long i = as_int(key, v);
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
        throw ConfigError(key, "integer out of range");
    return static_cast<int>(i);
}

std::uint64_t as_seed(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    const auto r = std::from_chars(first, last, out);
    if (r.ec != std::errc() || r.ptr != last) throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    return out;
}

const std::vector<std::string> kKeys{
    "activation",       "data",          "fraud_rate",   "fraud_time_slices", "gamma",
    "heads",            "hidden",        "lambda",       "leaky_slope",       "learning_rate",
    "max_epochs",       "metapaths",     "n_card_holders", "n_merchants",     "n_regions",
    "out",              "patience",      "policy",       "region_ids",        "region_shift_strength",
    "replay_ratio",     "seed",          "semantic",     "sigma_scale",       "signal_strength",
    "threshold",        "train_fraction", "txns_per_region", "val_fraction",  "variant",
    "weight_decay"};

} // namespace

std::vector<std::string> config_keys() {
    auto keys = kKeys;
    std::sort(keys.begin(), keys.end());
    return keys;
}

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
    ConfigFile f;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source, "line " + std::to_string(number) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(text).substr(0, eq));
        const std::string value = trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) throw ConfigError(source, "line " + std::to_string(number) + ": empty key");
        if (f.values_.count(key)) throw ConfigError(key, "set twice (line " + std::to_string(number) + ")");
        f.values_[key] = value;
    }
    return f;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    return parse(in, path.string());
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

RunConfig resolve_config(const ConfigFile& file) {
    RunConfig c;
    double train_fraction = c.train.split.train;
    double val_fraction = c.train.split.val;
    for (const auto& [key, v] : file.values()) {
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) throw ConfigError(key, "unknown configuration key");
        if (key == "seed") {
            c.synth.seed = c.train.seed = as_seed(key, v);
        } else if (key == "out") {
            c.out = v;
        } else if (key == "data") {
            c.data.clear();
            for (const auto& p : split_list(v)) c.data.emplace_back(p);
        } else if (key == "region_ids") {
            c.region_ids.clear();
            for (const auto& p : split_list(v)) c.region_ids.push_back(as_int32(key, p));
        } else if (key == "n_regions") {
            c.synth.n_regions = as_int32(key, v);
        } else if (key == "txns_per_region") {
            c.synth.txns_per_region = as_int32(key, v);
        } else if (key == "n_card_holders") {
            c.synth.n_card_holders = as_int32(key, v);
        } else if (key == "n_merchants") {
            c.synth.n_merchants = as_int32(key, v);
        } else if (key == "fraud_rate") {
            c.synth.fraud_rate = as_double(key, v);
        } else if (key == "fraud_time_slices") {
            c.synth.fraud_time_slices.clear();
            for (const auto& p : split_list(v)) c.synth.fraud_time_slices.insert(as_int32(key, p));
        } else if (key == "region_shift_strength") {
            c.synth.region_shift_strength = as_double(key, v);
        } else if (key == "signal_strength") {
            c.synth.signal_strength = as_double(key, v);
        } else if (key == "learning_rate") {
            c.train.learning_rate = as_double(key, v);
        } else if (key == "weight_decay") {
            c.train.weight_decay = as_double(key, v);
        } else if (key == "max_epochs") {
            c.train.max_epochs = as_int32(key, v);
        } else if (key == "patience") {
            c.train.patience = as_int32(key, v);
        } else if (key == "replay_ratio") {
            c.train.replay_ratio = as_double(key, v);
        } else if (key == "lambda") {
            c.train.lambda = as_double(key, v);
        } else if (key == "gamma") {
            c.train.gamma = as_double(key, v);
        } else if (key == "sigma_scale") {
            c.train.sigma_scale = as_double(key, v);
        } else if (key == "variant") {
            c.train.variant = variant_from_string(v);
        } else if (key == "threshold") {
            c.train.threshold = as_double(key, v);
        } else if (key == "train_fraction") {
            train_fraction = as_double(key, v);
        } else if (key == "val_fraction") {
            val_fraction = as_double(key, v);
        } else if (key == "hidden") {
            c.train.model.hidden = as_int32(key, v);
        } else if (key == "heads") {
            c.train.model.heads = as_int32(key, v);
        } else if (key == "semantic") {
            c.train.model.semantic = as_int32(key, v);
        } else if (key == "leaky_slope") {
            c.train.model.leaky_slope = as_double(key, v);
        } else if (key == "activation") {
            c.train.model.activation = activation_from_string(v);
        } else if (key == "metapaths") {
            c.train.metapaths = split_list(v);
        } else if (key == "policy") {
            if (v == "parallel")
                c.train.policy = Policy::parallel;
            else if (v == "reference")
                c.train.policy = Policy::reference;
            else
                throw ConfigError(key, "expected 'parallel' or 'reference'");
        }
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction", "must lie in (0, 1)");
    if (!(val_fraction > 0.0 && train_fraction + val_fraction < 1.0))
        throw ConfigError("val_fraction", "must be positive and leave room for a test split");
    c.train.split = {train_fraction, val_fraction, 1.0 - train_fraction - val_fraction};
    if (!c.region_ids.empty() && !c.data.empty() && c.region_ids.size() != c.data.size())
        throw ConfigError("region_ids", "needs one id per data file");
    c.synth.validate();
    c.train.validate();
    return c;
}

std::map<std::string, std::string> RunConfig::resolved() const {
    using csv::format_double;
    std::map<std::string, std::string> m;
    m["seed"] = std::to_string(train.seed);
    m["out"] = out;
    std::vector<std::string> paths;
    for (const auto& p : data) paths.push_back(p.string());
    m["data"] = join(paths);
    m["region_ids"] = join(region_ids);
    m["n_regions"] = std::to_string(synth.n_regions);
    m["txns_per_region"] = std::to_string(synth.txns_per_region);
    m["n_card_holders"] = std::to_string(synth.n_card_holders);
    m["n_merchants"] = std::to_string(synth.n_merchants);
    m["fraud_rate"] = format_double(synth.fraud_rate);
    m["fraud_time_slices"] = join(synth.fraud_time_slices);
    m["region_shift_strength"] = format_double(synth.region_shift_strength);
    m["signal_strength"] = format_double(synth.signal_strength);
    m["learning_rate"] = format_double(train.learning_rate);
    m["weight_decay"] = format_double(train.weight_decay);
    m["max_epochs"] = std::to_string(train.max_epochs);
    m["patience"] = std::to_string(train.patience);
    m["replay_ratio"] = format_double(train.replay_ratio);
    m["lambda"] = format_double(train.lambda);
    m["gamma"] = format_double(train.gamma);
    m["sigma_scale"] = format_double(train.sigma_scale);
    m["variant"] = std::string(to_string(train.variant));
    m["threshold"] = format_double(train.threshold);
    m["train_fraction"] = format_double(train.split.train);
    m["val_fraction"] = format_double(train.split.val);
    m["hidden"] = std::to_string(train.model.hidden);
    m["heads"] = std::to_string(train.model.heads);
    m["semantic"] = std::to_string(train.model.semantic);
    m["leaky_slope"] = format_double(train.model.leaky_slope);
    m["activation"] = std::string(to_string(train.model.activation));
    m["metapaths"] = join(train.metapaths);
    m["policy"] = train.policy == Policy::parallel ? "parallel" : "reference";
    return m;
}

} // namespace tradegraph
