#pragma once

// Experiment driver: runs training into an output directory (bank CSV,
// metrics JSONL, summary JSON, checkpoints), the cumulative ablation ladder,
// the best-of-n verification bundle, curve extraction, and the CLI.

#include <iosfwd>
#include <string>
#include <vector>

#include "orlab/config.hpp"

namespace orlab {

// Stable identifier for one training run: "<variant>-seed<seed>".
std::string run_identifier(const ExperimentConfig& cfg);

// Full pipeline into cfg.out_dir; returns 0 on success.  Wall-clock timing
// goes to a separate file so the metrics and summary stay reproducible.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

// All four ladder variants for every seed in cfg.seeds, plus ablation.csv
// with per-seed final success and mean/median per variant.
int run_ablation(const ExperimentConfig& cfg, std::ostream& log);

// Runs the verification suites; writes verify_bon.json and bon_summary.csv.
// Returns 0 when every suite passes, 2 otherwise.
int run_verify_bon(const ExperimentConfig& cfg, std::ostream& log);

// Extracts success-vs-iteration curves from metrics files into out_dir;
// unreadable inputs are skipped with a warning.
int run_plot(const std::vector<std::string>& metrics_files, const std::string& out_dir,
             std::ostream& log);

// Rejection-sampling initialization only.
int run_rft(const ExperimentConfig& cfg, std::ostream& log);

// Loads checkpoints from a finished run directory and emits heatmap.csv.
int run_heatmap(const ExperimentConfig& cfg, const std::string& run_dir, std::ostream& log);

// The orlab command-line entry point (exit codes: 0 ok, 1 usage, 2 suite failure).
int cli_main(int argc, const char* const* argv);

}  // namespace orlab
