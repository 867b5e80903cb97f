#include "tradegraph/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct SharedFlags {
    std::string config;
    std::string manifest;
    std::string out;
    std::string seed;
    std::string variant;
    std::vector<std::string> sets;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
    cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--manifest", f.manifest, "rerun from a manifest.json written by an earlier run")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_option("--set", f.sets, "override a config key (key=value), repeatable");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-regional fraud detection on heterogeneous trade graphs"};
    app.set_version_flag("--version", std::string(TRADEGRAPH_VERSION));
    app.require_subcommand(1);

    SharedFlags flags;
    std::vector<std::string> run_dirs;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"synth", "generate synthetic regional transaction files"},
        {"build-graph", "build and save the heterogeneous graph of each region"},
        {"single", "train and evaluate on one region"},
        {"sequence", "run the cross-regional protocol over all regions"},
        {"report", "summarize metrics.json files of earlier runs"}};
    for (const auto& [name, help] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_shared(cmd, flags);
        if (name == "single" || name == "sequence")
            cmd->add_option("--variant", flags.variant, "full, no_rps, no_pkr or naive");
        if (name == "report") cmd->add_option("runs", run_dirs, "run directories")->check(CLI::ExistingDirectory);
    }
    CLI11_PARSE(app, argc, argv);

    tradegraph::CommandOptions opt;
    opt.command = app.get_subcommands().front()->get_name();
    if (!flags.config.empty()) opt.config = flags.config;
    if (!flags.manifest.empty()) opt.manifest = flags.manifest;
    for (const auto& s : flags.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects key=value, got '" << s << "'\n";
            return 2;
        }
        opt.overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (!flags.out.empty()) opt.overrides["out"] = flags.out;
    if (!flags.seed.empty()) opt.overrides["seed"] = flags.seed;
    if (!flags.variant.empty()) opt.overrides["variant"] = flags.variant;
    for (const auto& d : run_dirs) opt.run_dirs.emplace_back(d);

    try {
        const auto out = tradegraph::run_command(opt, std::cout);
        std::cout << "outputs in " << out.string() << "\n";
        return 0;
    } catch (const tradegraph::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tradegraph::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
