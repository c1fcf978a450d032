#pragma once

// Tabular token-level credit model: scalar scores over post-action contexts,
// trained with a sequence-level cross-entropy against the binary verifier
// outcome, plus the clipped positive/negative token weights derived from
// those scores.

#include <string>
#include <unordered_map>
#include <vector>

#include "orlab/envsim.hpp"

namespace orlab {

// Unseen contexts score 0, i.e. a neutral 0.5 after the logistic squash.
struct CreditTable {
    std::unordered_map<ContextKey, double> scores;
};

using CreditGrad = std::unordered_map<ContextKey, double>;

// Raw scores at the trajectory's post-action contexts (the context after
// each token, so a step's score can see the token it graded).
std::vector<double> token_scores(const CreditTable& credit, const Trajectory& traj);

// sigmoid(mean of token scores): the model's success estimate.
double sequence_success_prob(const CreditTable& credit, const Trajectory& traj);

struct CeResult {
    double loss = 0.0;
    CreditGrad grad;
};

// Cross-entropy of the sequence estimate against the binary reward; the
// gradient is (estimate - reward) / T at every visited score entry.
CeResult ce_loss_and_grad(const CreditTable& credit, const Trajectory& traj, int reward);

struct TokenWeights {
    std::vector<double> omega_plus;   // max(2*sigmoid(w) - 1, 0)
    std::vector<double> omega_minus;  // max(1 - 2*sigmoid(w), 0)
};

TokenWeights omega_weights(const std::vector<double>& scores);

// One accumulated gradient-descent step on the mean cross-entropy over the
// batch; trajectories carry their verified rewards.  An empty batch is a
// no-op.
void credit_update(CreditTable& credit, const std::vector<Trajectory>& batch, double lr);

struct HeatmapRow {
    int traj_id = 0;
    int step = 0;
    int token = 0;
    double w = 0.0;        // raw score
    double score01 = 0.0;  // sigmoid(w)
};

std::vector<HeatmapRow> emit_token_heatmap(const CreditTable& credit,
                                           const std::vector<Trajectory>& trajectories);
void write_heatmap_csv(const std::string& path, const std::vector<HeatmapRow>& rows);

// Versioned flat-text checkpoints; hexfloat fields make round-trips bit-exact.
void save_credit(const std::string& path, const CreditTable& credit);
CreditTable load_credit(const std::string& path);

}  // namespace orlab
