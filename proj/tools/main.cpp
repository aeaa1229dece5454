#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hmpc/errors.hpp"
#include "hmpc/experiment.hpp"

namespace {

// Exit codes: 0 ok, 1 configuration error, 2 a run crashed. Divergence
// of a closed loop is a recorded outcome, not a crash.
int with_config(const std::string& path, bool validate_only,
                const std::optional<std::string>& out_override,
                const std::optional<std::uint64_t>& seed_override,
                const std::function<int(hmpc::ExperimentConfig&)>& body) {
    hmpc::ExperimentConfig cfg;
    try {
        cfg = hmpc::ExperimentConfig::from_file(path);
        if (out_override) {
            cfg.output_dir = *out_override;
        }
        if (seed_override) {
            cfg.seeds = {*seed_override};
        }
        cfg.validate();
    } catch (const hmpc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }
    if (validate_only) {
        std::cout << "config ok: " << path << '\n';
        return 0;
    }
    try {
        return body(cfg);
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampled-data MPC experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool have_seed = false;
    bool validate_only = false;
    int workers = 1;
    std::vector<double> td_grid;
    std::vector<double> ts_grid;

    auto* run = app.add_subcommand("run", "run every scheme in a config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory override");
    run->add_option("--workers", workers, "concurrent scheme/seed jobs");
    run->add_flag("--validate-only", validate_only, "check the config and exit");
    run->add_option("--seed", seed, "replace the seed list with a single seed")
        ->each([&](const std::string&) { have_seed = true; });

    auto* sweep = app.add_subcommand("sweep", "grid study over t_d and t_s");
    sweep->add_option("config", config_path, "experiment config (JSON)")->required();
    sweep->add_option("--td", td_grid, "discretization times")->expected(-1);
    sweep->add_option("--ts", ts_grid, "sampling times")->expected(-1);
    sweep->add_option("--out", out_dir, "output directory override");
    sweep->add_option("--workers", workers, "concurrent grid jobs");
    sweep->add_flag("--validate-only", validate_only, "check the config and exit");
    sweep->add_option("--seed", seed, "replace the seed list with a single seed")
        ->each([&](const std::string&) { have_seed = true; });

    CLI11_PARSE(app, argc, argv);

    const std::optional<std::string> out_opt =
        out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir);
    const std::optional<std::uint64_t> seed_opt =
        have_seed ? std::optional<std::uint64_t>(seed) : std::nullopt;

    if (app.got_subcommand(run)) {
        return with_config(config_path, validate_only, out_opt, seed_opt,
                           [&](hmpc::ExperimentConfig& cfg) {
                               hmpc::run_experiment(cfg, workers);
                               std::cout << "artifacts written to " << cfg.output_dir << '\n';
                               return 0;
                           });
    }
    if (td_grid.empty() || ts_grid.empty()) {
        std::cerr << "config error: sweep requires --td and --ts\n";
        return 1;
    }
    return with_config(config_path, validate_only, out_opt, seed_opt,
                       [&](hmpc::ExperimentConfig& cfg) {
                           hmpc::sweep_experiment(cfg, td_grid, ts_grid, workers);
                           std::cout << "sweep written to " << cfg.output_dir << '\n';
                           return 0;
                       });
}
