#pragma once

// Sequence-level advantage estimators for grouped rollouts: the shaped
// negative-sample coefficient, leave-one-out and group-standardized
// baselines, telescoping value differences, and the pairwise win rate.

#include <utility>
#include <vector>

#include "orlab/envsim.hpp"

namespace orlab {

enum class AdvantageMode {
    Shaped,  // negative coefficient 1 - pass_rate
    Rloo,    // leave-one-out baseline magnitudes
    Grpo,    // group-standardized magnitudes
};

struct RolloutGroup {
    int question_id = 0;
    std::vector<Trajectory> trajectories;
    std::vector<int> rewards;
    double pass_rate = 0.0;
};

RolloutGroup make_rollout_group(int question_id, std::vector<Trajectory> trajectories);

// Down-weighting coefficient for failed samples: 1 - p_hat.
double shape_negative_coefficient(double p_hat);

// r_i minus the mean reward of the other K-1 rollouts; sums to zero exactly.
std::vector<double> rloo_advantages(const std::vector<int>& rewards);

// (r_i - mean) / population std; throws std::domain_error when all rewards
// are equal (degenerate group).
std::vector<double> grpo_standardize(const std::vector<int>& rewards);

struct AdvantageSeq {
    std::vector<double> values;
    double gamma = 1.0;
};

// Per-step advantages as discounted value differences V(t+1) - V(t).
AdvantageSeq first_differences(const std::vector<double>& values, double gamma);

// Discounted sum of the advantages; with gamma = 1 this telescopes to
// V(T) - V(0).  `values` must be one element longer than the advantages.
double telescope_return(const AdvantageSeq& advantages, const std::vector<double>& values);

// Probability that the first completion beats the second: sigmoid(r1 - r2).
double win_rate(double r1, double r2);

// Per-trajectory magnitude of the negative-sample coefficient under the
// selected estimator; positive for failed samples in non-degenerate groups.
double negative_coefficient(const RolloutGroup& group, AdvantageMode mode, std::size_t index);

const char* advantage_mode_name(AdvantageMode mode);

}  // namespace orlab
