#pragma once
// Experiment driver behind the `mpt-experiment` command line tool. A YAML
// config describes classes, frequencies, noise, instance schedule, methods and
// protocol settings; each command writes its outputs plus a manifest under the
// output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mpt/classifiers.hpp"
#include "mpt/dictionary.hpp"

namespace mpt {

struct FrequencyBand {
    double min_radps = 0;
    double max_radps = 0;
    int count = 1;
    bool log_spacing = false;

    std::vector<double> grid() const;
    std::vector<double> grid(int count_override) const;
};

struct SweepAxis {
    std::string name;  // frequency_count, snr_db, train_snr_db, test_snr_db, instances_per_class, <method>.<option>
    std::vector<double> values;
};

// Variation spreads as multiples of the class means.
struct Regime {
    std::string name;
    double alpha_std_factor = 0;
    double sigma_std_factor = 0;
};

struct HeldOut {
    std::string class_name;
    std::string geometry_id;
};

struct ExperimentConfig {
    std::optional<std::uint64_t> seed;
    std::vector<ClassSpec> classes;  // v_count is filled in per schedule entry
    FrequencyBand frequencies;
    FeatureKind kind = FeatureKind::Invariants;
    double train_snr_db = kNoNoise;
    double test_snr_db = kNoNoise;
    std::vector<int> instances_per_class = {200};
    std::vector<Method> methods = {Method::Logistic};
    Hyperparams hyper;
    int mccv_iterations = 100;
    double test_fraction = 0.25;
    std::vector<SweepAxis> sweep_axes;
    std::vector<HeldOut> held_out;
    std::vector<Regime> regimes;
    int loo_repeats = 10;
    int noise_draws = 10000;
    std::vector<double> noise_snr_db = {40, 20, 10};

    // Canonical JSON of every setting that influences results.
    std::string canonical_json() const;
    std::uint64_t hash() const;
};

// Throws ConfigError (bad keys, values, missing seed, missing files) and the
// signature loader's ParseError / IoError. Relative file paths resolve
// against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = ".");

// Class specs with v_count chosen so that each class holds at least
// `per_class` samples: v_count = ceil(per_class / geometries).
std::vector<ClassSpec> specs_for(const ExperimentConfig& cfg, int per_class);

std::uint64_t fnv1a64(const std::string& bytes);

struct RunOptions {
    std::filesystem::path out = "out";
    int threads = 1;
    bool quiet = false;
    std::vector<std::filesystem::path> models;  // evaluate: explicit model files
};

// Each writes into opts.out and finishes with manifest.json. Returns the
// written file names (relative to opts.out, manifest last).
std::vector<std::string> cmd_build(const ExperimentConfig& cfg, const RunOptions& opts);
std::vector<std::string> cmd_train(const ExperimentConfig& cfg, const RunOptions& opts);
std::vector<std::string> cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opts);
std::vector<std::string> cmd_compare(const ExperimentConfig& cfg, const RunOptions& opts);
std::vector<std::string> cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opts);
std::vector<std::string> cmd_loo(const ExperimentConfig& cfg, const RunOptions& opts);
std::vector<std::string> cmd_noise_check(const ExperimentConfig& cfg, const RunOptions& opts);

// Full command line (argv[0] is the program name). Returns the exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace mpt
