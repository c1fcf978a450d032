#pragma once

// Outcome-reward training loop: rejection-sampling initialization, grouped
// rollouts with pass-rate filtering, the positive/negative policy losses with
// optional token-level importance weights, and the iteration driver.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orlab/advantage.hpp"
#include "orlab/credit.hpp"
#include "orlab/envsim.hpp"
#include "orlab/policy.hpp"
#include "orlab/rng.hpp"

namespace orlab {

// Ablation axes, cumulative.  Exactly four combinations are named variants:
//   (-,-,-) reinforce          batch-mean-centered policy gradient
//   (x,-,-) reward_shaping     positives cloned, negatives down-weighted by 1-p
//   (x,x,-) behavior_cloning   one selected positive/negative pair per group
//   (x,x,x) full               adds token importance weights from the credit table
struct AblationFlags {
    bool reward_shaping = true;
    bool behavior_cloning = true;
    bool token_weights = true;
};

// Throws std::invalid_argument on a flag combination outside the ladder.
std::string variant_name(const AblationFlags& flags);
AblationFlags variant_flags(const std::string& name);
const std::vector<std::string>& variant_ladder();

struct TrainConfig {
    int batch_questions = 16;
    int rollouts = 16;
    int iterations = 200;
    double policy_lr = 0.5;
    double credit_lr = 2.0;
    int warmup_steps = 10;
    double beta = 0.01;
    double eta = 1.0;
    double gamma = 1.0;
    AdvantageMode advantage_mode = AdvantageMode::Shaped;
    double filter_lo = 0.0;  // question-curation band, open interval
    double filter_hi = 0.8;
    std::uint64_t seed = 1;
    int eval_every = 10;
    int rft_samples = 2;
    int rft_bc_steps = 20;
    double rft_lr = 0.5;
    double verifier_noise = 0.0;  // false-negative flip probability
};

void validate_train_config(const TrainConfig& cfg);

struct RftResult {
    PolicyTable policy;
    std::vector<Trajectory> kept;  // the reward-1 rollouts that were cloned
    bool no_positives_warning = false;
};

// Samples `samples_per_q` rollouts per question, keeps the correct ones, and
// behavior-clones them for `bc_steps` full-batch gradient steps.  With zero
// positives the base policy comes back unchanged and the warning flag is set.
RftResult rft_init(const PolicyTable& base, const EnvSpec& env,
                   const std::vector<Question>& bank, int samples_per_q, int bc_steps,
                   double lr, std::uint64_t seed);

// Mean reward of K seeded rollouts; a multiple of 1/K in [0, 1].
double estimate_pass_rate(const PolicyTable& policy, const EnvSpec& env, const Question& q,
                          int k, std::uint64_t seed);

// Indices of questions whose estimated pass rate lies strictly inside (lo, hi).
std::vector<int> curate_bank(const std::vector<double>& rates, double lo, double hi);

// Uniform choice of one correct and one incorrect trajectory; throws
// std::invalid_argument on a degenerate group.
struct TrajectoryPair {
    std::size_t positive_index = 0;
    std::size_t negative_index = 0;
};
TrajectoryPair select_pair(const RolloutGroup& group, Rng& rng);

struct LossResult {
    double loss = 0.0;
    double data_term = 0.0;
    double kl_term = 0.0;  // the raw KL value (unscaled by beta)
    SparseGrad grad;
};

// Mean negative log-likelihood of the positives plus beta * KL over `contexts`.
LossResult loss_l1(const PolicyTable& policy, const PolicyTable& policy_old,
                   const std::vector<Trajectory>& positives,
                   const std::vector<ContextKey>& contexts, double beta);

// Mean over negatives of coeff_i * log(pi/pi_old)(s_i) plus beta * KL.
LossResult loss_l2(const PolicyTable& policy, const PolicyTable& policy_old,
                   const std::vector<Trajectory>& negatives,
                   const std::vector<double>& coefficients,
                   const std::vector<ContextKey>& contexts, double beta);

// Token-weighted pair loss:
//   sum_t -w_plus[t] * log pi(a_t|c_t)            over the positive
// + eta * neg_shaping * sum_t w_minus[t] * log(pi/pi_old)(a_t|c_t)  over the negative
// + beta * KL over `contexts`.
LossResult loss_total_weighted(const PolicyTable& policy, const PolicyTable& policy_old,
                               const Trajectory& positive, const std::vector<double>& w_plus,
                               const Trajectory& negative, const std::vector<double>& w_minus,
                               double neg_shaping, double eta, double beta,
                               const std::vector<ContextKey>& contexts);

// Same with weights read from the credit table and neg_shaping = 1 - p_hat.
LossResult loss_total(const PolicyTable& policy, const PolicyTable& policy_old,
                      const CreditTable& credit, const Trajectory& positive,
                      const Trajectory& negative, double p_hat, double eta, double beta,
                      const std::vector<ContextKey>& contexts);

// Sorted, de-duplicated sampling contexts visited by the given trajectories.
std::vector<ContextKey> visited_contexts(const std::vector<const Trajectory*>& trajs);

struct IterationMetrics {
    int iteration = 0;
    double mean_pass_rate = 0.0;
    int kept_groups = 0;
    bool skipped = false;
    double loss_total = 0.0;
    double loss_positive = 0.0;
    double loss_negative = 0.0;
    double kl = 0.0;
    double credit_loss = 0.0;
    double greedy_success = 0.0;
    std::vector<int> all_fail_question_ids;  // pass rate exactly 0 this iteration
};

struct TrainState {
    PolicyTable policy;
    PolicyTable policy_old;
    CreditTable credit;
    int iteration = 0;
};

// One iteration: snapshot pi_old, roll out K per question, filter degenerate
// groups, update credit (full variant only) and policy, evaluate greedily.
IterationMetrics train_step(TrainState& state, const std::vector<Question>& batch,
                            const std::vector<Question>& eval_bank, const EnvSpec& env,
                            const TrainConfig& cfg, const AblationFlags& flags);

// Fraction of questions answered correctly by greedy decoding.
double greedy_success(const PolicyTable& policy, const EnvSpec& env,
                      const std::vector<Question>& bank);

struct TrainResult {
    PolicyTable policy;       // final
    PolicyTable best_policy;  // best periodic greedy evaluation
    PolicyTable rft_policy;
    CreditTable credit;
    CreditTable best_credit;
    double init_success = 0.0;  // greedy success right after initialization
    double final_success = 0.0;
    double best_success = 0.0;
    int best_iteration = -1;
    int curated_questions = 0;
    std::size_t rft_positives = 0;
    bool rft_warning = false;
    std::vector<IterationMetrics> metrics;
    std::map<int, int> failure_counts;  // question id -> all-fail group count
};

// Full pipeline: rejection-sampling init, pass-rate curation, then
// `iterations` train steps with periodic best-checkpoint tracking.
TrainResult train(const EnvSpec& env, const std::vector<Question>& bank,
                  const TrainConfig& cfg, const AblationFlags& flags);

// Questions sharing a skill with any question failed at least `threshold`
// times, excluding the failed question itself; sorted unique ids.
std::vector<int> skill_augment(const std::map<int, int>& failure_counts,
                               const std::vector<Question>& bank, int threshold);

}  // namespace orlab
