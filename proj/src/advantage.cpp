#include "orlab/advantage.hpp"

#include <cmath>
#include <stdexcept>

#include "orlab/mathutil.hpp"

namespace orlab {

RolloutGroup make_rollout_group(int question_id, std::vector<Trajectory> trajectories) {
    if (trajectories.empty()) {
        throw std::invalid_argument("make_rollout_group: empty rollout set");
    }
    RolloutGroup g;
    g.question_id = question_id;
    g.trajectories = std::move(trajectories);
    g.rewards.reserve(g.trajectories.size());
    double sum = 0.0;
    for (const auto& traj : g.trajectories) {
        g.rewards.push_back(traj.reward);
        sum += static_cast<double>(traj.reward);
    }
    g.pass_rate = sum / static_cast<double>(g.trajectories.size());
    return g;
}

double shape_negative_coefficient(double p_hat) {
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) {
        throw std::invalid_argument("shape_negative_coefficient: pass rate outside [0, 1]");
    }
    return 1.0 - p_hat;
}

std::vector<double> rloo_advantages(const std::vector<int>& rewards) {
    const std::size_t k = rewards.size();
    if (k < 2) {
        throw std::domain_error("rloo_advantages: need at least two rollouts");
    }
    double sum = 0.0;
    for (int r : rewards) {
        sum += static_cast<double>(r);
    }
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double others = sum - static_cast<double>(rewards[i]);
        out[i] = static_cast<double>(rewards[i]) - others / static_cast<double>(k - 1);
    }
    return out;
}

std::vector<double> grpo_standardize(const std::vector<int>& rewards) {
    const std::size_t k = rewards.size();
    if (k < 2) {
        throw std::domain_error("grpo_standardize: need at least two rollouts");
    }
    double mean = 0.0;
    for (int r : rewards) {
        mean += static_cast<double>(r);
    }
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (int r : rewards) {
        const double d = static_cast<double>(r) - mean;
        var += d * d;
    }
    var /= static_cast<double>(k);
    if (var == 0.0) {
        throw std::domain_error("grpo_standardize: degenerate group (all rewards equal)");
    }
    const double sd = std::sqrt(var);
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = (static_cast<double>(rewards[i]) - mean) / sd;
    }
    return out;
}

AdvantageSeq first_differences(const std::vector<double>& values, double gamma) {
    if (values.size() < 2) {
        throw std::invalid_argument("first_differences: need at least two values");
    }
    AdvantageSeq seq;
    seq.gamma = gamma;
    seq.values.reserve(values.size() - 1);
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        seq.values.push_back(gamma * values[t + 1] - values[t]);
    }
    return seq;
}

double telescope_return(const AdvantageSeq& advantages, const std::vector<double>& values) {
    if (advantages.values.size() + 1 != values.size()) {
        throw std::invalid_argument(
            "telescope_return: advantage/value length mismatch (need one more value)");
    }
    double sum = 0.0;
    double w = 1.0;
    for (double a : advantages.values) {
        sum += w * a;
        w *= advantages.gamma;
    }
    return sum;
}

double win_rate(double r1, double r2) {
    return sigmoid(r1 - r2);
}

double negative_coefficient(const RolloutGroup& group, AdvantageMode mode, std::size_t index) {
    if (index >= group.trajectories.size()) {
        throw std::invalid_argument("negative_coefficient: index out of range");
    }
    if (group.rewards[index] != 0) {
        throw std::invalid_argument("negative_coefficient: trajectory is not a failure");
    }
    switch (mode) {
        case AdvantageMode::Shaped:
            return shape_negative_coefficient(group.pass_rate);
        case AdvantageMode::Rloo:
            return -rloo_advantages(group.rewards)[index];
        case AdvantageMode::Grpo:
            return -grpo_standardize(group.rewards)[index];
    }
    throw std::logic_error("negative_coefficient: unreachable");
}

const char* advantage_mode_name(AdvantageMode mode) {
    switch (mode) {
        case AdvantageMode::Shaped:
            return "shaped";
        case AdvantageMode::Rloo:
            return "rloo";
        case AdvantageMode::Grpo:
            return "grpo";
    }
    return "unknown";
}

}  // namespace orlab
