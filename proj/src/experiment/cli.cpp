#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "mpt/errors.hpp"
#include "mpt/experiment.hpp"

namespace mpt {

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Metal object classification experiments from magnetic polarizability signatures", "mpt-experiment"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    RunOptions opts;
    opts.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string out_dir = "out";
    app.add_option("--config", config_path, "YAML experiment config")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--threads", opts.threads, "worker cap")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--quiet", opts.quiet, "no progress on stderr");

    using Command = std::vector<std::string> (*)(const ExperimentConfig&, const RunOptions&);
    std::vector<std::pair<CLI::App*, Command>> verbs = {
        {app.add_subcommand("build", "write train/test dictionaries for each instance count"), cmd_build},
        {app.add_subcommand("train", "fit every configured method on the first instance count"), cmd_train},
        {app.add_subcommand("evaluate", "score trained models on fresh test objects"), cmd_evaluate},
        {app.add_subcommand("compare", "MCCV kappa table per method and instance count"), cmd_compare},
        {app.add_subcommand("sweep", "MCCV kappa over a one- or two-axis grid"), cmd_sweep},
        {app.add_subcommand("loo", "leave-one-geometry-out posterior summaries"), cmd_loo},
        {app.add_subcommand("noise-check", "measured relative noise at each SNR"), cmd_noise_check},
    };
    std::vector<std::string> models;
    verbs[2].first->add_option("--model", models, "model JSON file(s); defaults to <out>/model_<method>.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    opts.out = out_dir;
    for (const auto& m : models) opts.models.emplace_back(m);

    try {
        auto cfg = load_config(config_path);
        if (seed) cfg.seed = seed;
        for (const auto& [sub, fn] : verbs)
            if (sub->parsed()) fn(cfg, opts);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace mpt
