#include "tradegraph/commands.hpp"
#include "tradegraph/config.hpp"

#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <sstream>

using namespace tradegraph;
namespace fs = std::filesystem;

namespace {

const std::string kCli = TRADEGRAPH_CLI_PATH;

support::Exec cli(const std::string& args) { return support::run("'" + kCli + "' " + args); }

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(support::read_file(p)); }

const std::string kSmall = " --set n_regions=2 --set txns_per_region=300 --set n_card_holders=150 --set n_merchants=40"
                           " --set hidden=8 --set heads=2 --set semantic=8 --set max_epochs=8 --set patience=4";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("config files") {
    std::istringstream in("# comment\nlearning_rate = 0.01\n\nvariant=naive  # trailing\nregion_ids = 4, 5\n");
    const ConfigFile f = ConfigFile::parse(in);
    CHECK(f.get("learning_rate") == "0.01");
    CHECK(f.get("variant") == "naive");
    CHECK_FALSE(f.get("missing"));
    const RunConfig c = resolve_config(f);
    CHECK(c.train.learning_rate == 0.01);
    CHECK(c.train.variant == Variant::naive);
    CHECK(c.region_ids == std::vector<int>{4, 5});

    std::istringstream dup("seed = 1\nseed = 2\n");
    CHECK_THROWS_AS(ConfigFile::parse(dup), ConfigError);
    std::istringstream junk("just words\n");
    CHECK_THROWS_AS(ConfigFile::parse(junk), ConfigError);

    ConfigFile unknown;
    unknown.set("learning_rat", "0.1");
    try {
        resolve_config(unknown);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("learning_rat") != std::string::npos);
    }
    ConfigFile bad;
    bad.set("fraud_rate", "1.5");
    CHECK_THROWS_AS(resolve_config(bad), ConfigError);
    bad = ConfigFile{};
    bad.set("heads", "three");
    CHECK_THROWS_AS(resolve_config(bad), ConfigError);

    const auto keys = config_keys();
    CHECK(std::is_sorted(keys.begin(), keys.end()));
}

TEST_CASE("resolved config parses back to itself") {
    ConfigFile f;
    f.set("seed", "99");
    f.set("train_fraction", "0.5");
    f.set("metapaths", "TCT,TMT");
    f.set("lambda", "0.1");
    const RunConfig a = resolve_config(f);
    CHECK(a.synth.seed == 99);
    CHECK(a.train.seed == 99);
    CHECK(a.train.split.test == doctest::Approx(0.4));
    ConfigFile g;
    for (const auto& [k, v] : a.resolved()) g.set(k, v);
    CHECK(resolve_config(g).resolved() == a.resolved());
}

TEST_CASE("output directories") {
    const char* old = std::getenv(kOutputRootEnv);
    const std::string saved = old ? old : "";
    const fs::path root = support::temp_dir("out_root");
    setenv(kOutputRootEnv, root.c_str(), 1);
    CHECK(resolve_output_dir("", "single") == root / "runs" / "single");
    CHECK(resolve_output_dir("mine", "single") == root / "mine");
    CHECK(resolve_output_dir("/abs/dir", "single") == fs::path("/abs/dir"));
    if (old)
        setenv(kOutputRootEnv, saved.c_str(), 1);
    else
        unsetenv(kOutputRootEnv);
}

TEST_CASE("synth writes one file per region and reruns identically") {
    const fs::path dir = support::temp_dir("cli_synth");
    const auto a = cli("synth --out '" + (dir / "a").string() + "' --seed 3 --set n_regions=3 --set txns_per_region=200");
    REQUIRE(a.status == 0);
    for (int k = 1; k <= 3; ++k) {
        CHECK(fs::exists(dir / "a" / ("region_" + std::to_string(k) + ".csv")));
        CHECK(fs::exists(dir / "a" / ("temporal_profile_region_" + std::to_string(k) + ".csv")));
    }
    const auto m = read_json(dir / "a" / "manifest.json");
    CHECK(m["command"] == "synth");
    CHECK(m["status"] == "completed");
    CHECK(m["seed"] == 3);
    for (const char* key : {"tool_version", "config", "inputs", "output", "started_at", "finished_at"})
        CHECK(m.contains(key));

    REQUIRE(cli("synth --out '" + (dir / "b").string() + "' --seed 3 --set n_regions=3 --set txns_per_region=200")
                .status == 0);
    for (int k = 1; k <= 3; ++k) {
        const std::string name = "region_" + std::to_string(k) + ".csv";
        CHECK(support::read_file(dir / "a" / name) == support::read_file(dir / "b" / name));
    }
}

TEST_CASE("invalid configuration is rejected before any work") {
    const fs::path dir = support::temp_dir("cli_bad");
    const auto r = cli("synth --out '" + (dir / "x").string() + "' --set fraud_rate=1.5");
    CHECK(r.status == 2);
    CHECK(r.output.find("fraud_rate") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "x" / "region_1.csv"));

    const auto unknown = cli("single --out '" + (dir / "y").string() + "' --set no_such_key=1");
    CHECK(unknown.status == 2);
    CHECK(unknown.output.find("no_such_key") != std::string::npos);

    const auto variant = cli("sequence --out '" + (dir / "z").string() + "' --variant best");
    CHECK(variant.status == 2);
    CHECK(variant.output.find("variant") != std::string::npos);
}

TEST_CASE("missing input data is an I/O error") {
    const fs::path dir = support::temp_dir("cli_missing");
    const auto r = cli("single --out '" + (dir / "x").string() + "' --set data=" + (dir / "nope.csv").string());
    CHECK(r.status == 3);
    CHECK(r.output.find("nope.csv") != std::string::npos);
}

TEST_CASE("build-graph summarizes each region") {
    const fs::path dir = support::temp_dir("cli_graph");
    REQUIRE(cli("build-graph --out '" + dir.string() + "'" + kSmall).status == 0);
    const auto s = read_json(dir / "graph_summary.json");
    REQUIRE(s.size() == 2);
    CHECK(s[0]["transactions"] == 300);
    CHECK(s[0]["metapath_pairs"].contains("TST"));
    CHECK(fs::exists(dir / "graph_region_1"));
}

TEST_CASE("single emits every metric across training fractions") {
    const fs::path dir = support::temp_dir("cli_single");
    for (const char* frac : {"0.2", "0.8"}) {
        const fs::path out = dir / frac;
        const auto r = cli("single --out '" + out.string() + "' --set train_fraction=" + frac + " --set val_fraction=0.1" +
                           kSmall);
        REQUIRE_MESSAGE(r.status == 0, r.output);
        const auto j = read_json(out / "metrics.json");
        REQUIRE(j["regions"].size() == 1);
        for (const char* key : {"recall", "precision", "f1", "auc"}) CHECK(j["regions"][0].contains(key));
        CHECK(fs::exists(out / "timings.json"));
        CHECK(fs::exists(out / "history.csv"));
        CHECK(fs::exists(out / "theta_task1.ckpt"));
    }
}

TEST_CASE("single reaches a high AUC on the default generator") {
    const fs::path out = support::temp_dir("cli_single_auc");
    const auto r = cli("single --out '" + out.string() +
                       "' --set n_regions=1 --set txns_per_region=1500 --set n_card_holders=600 --set n_merchants=150"
                       " --set max_epochs=60 --set patience=15");
    REQUIRE_MESSAGE(r.status == 0, r.output);
    const auto j = read_json(out / "metrics.json");
    CHECK(j["regions"][0]["auc"].get<double>() >= 0.95);
}

TEST_CASE("sequence outputs, variants and report") {
    const fs::path dir = support::temp_dir("cli_sequence");
    std::string runs;
    for (const char* v : {"full", "no_rps", "no_pkr", "naive"}) {
        const fs::path out = dir / v;
        const auto r = cli(std::string("sequence --variant ") + v + " --out '" + out.string() + "'" + kSmall);
        REQUIRE_MESSAGE(r.status == 0, r.output);
        const auto j = read_json(out / "metrics.json");
        CHECK(j["variant"] == v);
        CHECK(j["regions"].size() == 2);
        CHECK(j["checkpoints"].size() == 3);
        CHECK(fs::exists(out / "forgetting_curves.csv"));
        CHECK(fs::exists(out / "theta_task1.ckpt"));
        CHECK(fs::exists(out / "theta_task2.ckpt"));
        CHECK(fs::exists(out / "history_task2.csv"));
        const bool smoothing = std::string(v) == "full" || std::string(v) == "no_pkr";
        const bool replay = std::string(v) == "full" || std::string(v) == "no_rps";
        CHECK(fs::exists(out / "fisher_task1.ckpt") == smoothing);
        CHECK(fs::exists(out / "replay_task1_features.csv") == replay);
        CHECK(fs::exists(out / "twins_task1_entities.csv") == replay);
        runs += " '" + out.string() + "'";
    }
    const auto rep = cli("report --out '" + (dir / "report").string() + "'" + runs);
    REQUIRE_MESSAGE(rep.status == 0, rep.output);
    const std::string table = support::read_file(dir / "report" / "report.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
    CHECK(table.find("no_pkr") != std::string::npos);
}

TEST_CASE("a manifest reruns byte for byte") {
    const fs::path dir = support::temp_dir("cli_manifest");
    REQUIRE(cli("sequence --out '" + (dir / "a").string() + "' --seed 5" + kSmall).status == 0);
    const auto r = cli("sequence --manifest '" + (dir / "a" / "manifest.json").string() + "' --out '" +
                       (dir / "b").string() + "'");
    REQUIRE_MESSAGE(r.status == 0, r.output);
    for (const char* f : {"metrics.json", "forgetting_curves.csv", "theta_task1.ckpt", "theta_task2.ckpt",
                          "fisher_task1.ckpt", "replay_task1_features.csv"})
        CHECK_MESSAGE(support::read_file(dir / "a" / f) == support::read_file(dir / "b" / f), f);
    const auto ma = read_json(dir / "a" / "manifest.json");
    const auto mb = read_json(dir / "b" / "manifest.json");
    auto ca = ma["config"], cb = mb["config"];
    ca.erase("out");
    cb.erase("out");
    CHECK(ca == cb);
}

} // TEST_SUITE
