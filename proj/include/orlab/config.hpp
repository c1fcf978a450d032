#pragma once

// Flat key-value experiment configuration: one documented schema, strict
// parsing (unknown keys are errors), and named-variant application.

#include <cstdint>
#include <string>
#include <vector>

#include "orlab/bon_verify.hpp"
#include "orlab/envsim.hpp"
#include "orlab/trainer.hpp"

namespace orlab {

struct ExperimentConfig {
    EnvSpec env;  // defaults: summod, alphabet 6, horizon 3, modulus 5
    int bank_count = 64;
    std::uint64_t bank_seed = 7;
    TrainConfig train;
    AblationFlags flags;
    std::string out_dir = "runs/out";
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<int> bon_n_list = {1, 2, 4, 8, 16};
    std::uint64_t bon_draws = 200000;
    std::vector<double> analysis_alphas = {0.1, 1.0, 10.0};
};

ExperimentConfig default_experiment_config();

// Parses `key = value` lines ('#' starts a comment).  Unknown keys, malformed
// values, and out-of-range settings all throw std::invalid_argument with the
// offending line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Overwrites the ablation flags with a named variant's.
void apply_variant(ExperimentConfig& cfg, const std::string& name);

void validate_experiment_config(const ExperimentConfig& cfg);

// The full key schema with defaults, suitable for --help output.
std::string config_schema_help();

BonVerifyOptions bon_options_from(const ExperimentConfig& cfg);

}  // namespace orlab
