#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "ekert/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Entangled-pair quantum key distribution simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> trials;
    std::optional<std::string> csv_path;

    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--seed", seed, "master seed (overrides the config file)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--trials", trials, "number of usable trials to collect");
    app.add_option("--csv", csv_path, "CSV output path for attack-sweep");

    auto* keygen = app.add_subcommand("keygen", "run a key-generation session end to end");
    auto* sweep = app.add_subcommand("attack-sweep", "sweep an attack basis over a plane");
    auto* theory = app.add_subcommand("theory", "print closed-form attack observables");
    auto* report = app.add_subcommand("report", "recompute the report from a session log");
    for (auto* sub : {keygen, sweep, theory, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    ekert::RunConfig config;
    try {
        if (!config_path.empty()) config = ekert::parse_config_file(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    if (seed) config.seed = *seed;
    if (out_dir) config.out_dir = *out_dir;
    if (csv_path) config.csv_path = *csv_path;
    if (trials) {
        config.n_trials = *trials;
        config.duration_s.reset();
        config.sweep_trials = *trials;
    }

    if (keygen->parsed()) return ekert::cmd_keygen(config, std::cout, std::cerr);
    if (sweep->parsed()) return ekert::cmd_attack_sweep(config, std::cout, std::cerr);
    if (theory->parsed()) return ekert::cmd_theory(config, std::cout, std::cerr);
    if (report->parsed()) return ekert::cmd_report(config, std::cout, std::cerr);
    return 1;
}
