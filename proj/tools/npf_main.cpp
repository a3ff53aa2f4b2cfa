// npf: polar-factorization toolkit CLI.
// Exit codes: 0 success, 1 runtime/training failure, 2 usage/config error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "npf/run_config.hpp"

namespace {

npf::RunConfig resolve_config(const std::string& config_path, const std::string& profile,
                              std::optional<uint64_t> seed, const std::string& out_dir) {
    npf::RunConfig cfg;
    if (!config_path.empty()) {
        cfg = npf::load_config_file(config_path, profile);
    } else {
        cfg = npf::default_config(profile.empty() ? "topography" : profile);
    }
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"npf: neural polar factorization toolkit"};
    app.require_subcommand(1);

    std::string config_path, profile, out_dir, checkpoint, grid_path, terrain_mode;
    std::optional<uint64_t> seed;
    bool plain = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration file (JSON)");
        sub->add_option("--profile", profile, "default table: topography or highdim")
            ->check(CLI::IsMember({"topography", "highdim"}));
        sub->add_option("--seed", seed, "global seed override");
        sub->add_option("--out", out_dir, "output directory override");
    };

    CLI::App* factorize = app.add_subcommand("factorize", "train the polar factorization");
    add_common(factorize);

    CLI::App* invert = app.add_subcommand("invert", "train the stochastic inverse generator");
    add_common(invert);
    invert->add_option("--checkpoint", checkpoint, "factorization checkpoint")->required();

    CLI::App* sample = app.add_subcommand("sample", "run the alternating sampler");
    add_common(sample);
    sample->add_option("--checkpoint", checkpoint, "checkpoint with potential/amortizer/drift");
    sample->add_flag("--plain", plain, "plain LMC on the objective, no factorization");

    CLI::App* benchmark = app.add_subcommand("benchmark", "architecture benchmark runs");
    add_common(benchmark);

    CLI::App* terrain = app.add_subcommand("terrain", "generate or ingest terrain grids");
    add_common(terrain);
    terrain->add_option("mode", terrain_mode, "generate or ingest")->required();
    terrain->add_option("--grid", grid_path, "grid CSV to ingest");

    CLI::App* metrics = app.add_subcommand("metrics", "re-evaluate checkpoint metrics");
    add_common(metrics);
    metrics->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    npf::RunConfig cfg;
    try {
        cfg = resolve_config(config_path, profile, seed, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (factorize->parsed()) return npf::cli::cmd_factorize(cfg);
        if (invert->parsed()) return npf::cli::cmd_invert(cfg, checkpoint);
        if (sample->parsed()) return npf::cli::cmd_sample(cfg, checkpoint, plain);
        if (benchmark->parsed()) return npf::cli::cmd_benchmark(cfg);
        if (terrain->parsed()) return npf::cli::cmd_terrain(cfg, terrain_mode, grid_path);
        if (metrics->parsed()) return npf::cli::cmd_metrics(cfg, checkpoint);
    } catch (const npf::cli::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
