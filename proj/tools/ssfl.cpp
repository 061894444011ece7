#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssfl/cli.hpp"
#include "ssfl/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Split federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    ssfl::RunOptions run_opts;
    std::string out_stem = "metrics";
    auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
    run->add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    run->add_option("--set", overrides, "Override a key, e.g. --set aggregation.lambda=0.02")->take_all();
    run->add_option("--out", out_stem, "Output stem for <stem>.csv and <stem>.jsonl");
    run->add_flag("--audit", run_opts.write_audit, "Also write per-client <stem>.audit.jsonl");

    std::string preset_name;
    std::string preset_dir = "results";
    auto* preset = app.add_subcommand("preset", "Run a named study and print its comparison table");
    preset->add_option("name", preset_name, "Preset name (see list-presets)")->required();
    preset->add_option("--out-dir", preset_dir, "Directory for metrics files");

    auto* list = app.add_subcommand("list-presets", "List the available presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::optional<std::filesystem::path> path;
            if (!config_path.empty()) path = config_path;
            const auto cfg = ssfl::parse_config(path, overrides);
            run_opts.out_stem = out_stem;
            return ssfl::run_command(cfg, run_opts, std::cout);
        }
        if (preset->parsed()) return ssfl::run_preset(preset_name, preset_dir, std::cout);
        if (list->parsed()) {
            ssfl::list_presets(std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
