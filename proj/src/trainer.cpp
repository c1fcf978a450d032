#include "orlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "orlab/rng.hpp"

namespace orlab {
namespace {

// Seed-stream tags so the independent random decisions never collide.
constexpr std::uint64_t kTagRft = 0x4F17;
constexpr std::uint64_t kTagRate = 0xCA7E;
constexpr std::uint64_t kTagBatch = 0xBA7C;
constexpr std::uint64_t kTagRollout = 0x9011;
constexpr std::uint64_t kTagPair = 0x9A12;
constexpr std::uint64_t kTagNoise = 0x0153;

}  // namespace

std::string variant_name(const AblationFlags& flags) {
    if (!flags.reward_shaping && !flags.behavior_cloning && !flags.token_weights) {
        return "reinforce";
    }
    if (flags.reward_shaping && !flags.behavior_cloning && !flags.token_weights) {
        return "reward_shaping";
    }
    if (flags.reward_shaping && flags.behavior_cloning && !flags.token_weights) {
        return "behavior_cloning";
    }
    if (flags.reward_shaping && flags.behavior_cloning && flags.token_weights) {
        return "full";
    }
    throw std::invalid_argument(
        "variant_name: flag combination is outside the cumulative ladder");
}

AblationFlags variant_flags(const std::string& name) {
    if (name == "reinforce") return AblationFlags{false, false, false};
    if (name == "reward_shaping") return AblationFlags{true, false, false};
    if (name == "behavior_cloning") return AblationFlags{true, true, false};
    if (name == "full") return AblationFlags{true, true, true};
    throw std::invalid_argument("variant_flags: unknown variant '" + name + "'");
}

const std::vector<std::string>& variant_ladder() {
    static const std::vector<std::string> ladder = {"reinforce", "reward_shaping",
                                                    "behavior_cloning", "full"};
    return ladder;
}

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.batch_questions < 1) throw std::invalid_argument("batch_questions must be >= 1");
    if (cfg.rollouts < 1) throw std::invalid_argument("rollouts must be >= 1");
    if (cfg.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(cfg.policy_lr > 0.0)) throw std::invalid_argument("policy_lr must be > 0");
    if (!(cfg.credit_lr > 0.0)) throw std::invalid_argument("credit_lr must be > 0");
    if (cfg.warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
    if (cfg.beta < 0.0) throw std::invalid_argument("beta must be >= 0");
    if (cfg.eta < 0.0) throw std::invalid_argument("eta must be >= 0");
    if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0) {
        throw std::invalid_argument("gamma must be in (0, 1]");
    }
    if (cfg.filter_lo < 0.0 || cfg.filter_hi > 1.0 || !(cfg.filter_lo < cfg.filter_hi)) {
        throw std::invalid_argument("filter band must satisfy 0 <= lo < hi <= 1");
    }
    if (cfg.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (cfg.rft_samples < 1) throw std::invalid_argument("rft_samples must be >= 1");
    if (cfg.rft_bc_steps < 0) throw std::invalid_argument("rft_bc_steps must be >= 0");
    if (!(cfg.rft_lr > 0.0)) throw std::invalid_argument("rft_lr must be > 0");
    if (cfg.verifier_noise < 0.0 || cfg.verifier_noise >= 1.0) {
        throw std::invalid_argument("verifier_noise must be in [0, 1)");
    }
}

RftResult rft_init(const PolicyTable& base, const EnvSpec& env,
                   const std::vector<Question>& bank, int samples_per_q, int bc_steps,
                   double lr, std::uint64_t seed) {
    if (samples_per_q < 1) throw std::invalid_argument("rft_init: samples_per_q must be >= 1");
    if (bc_steps < 0) throw std::invalid_argument("rft_init: bc_steps must be >= 0");
    if (!(lr > 0.0)) throw std::invalid_argument("rft_init: lr must be > 0");

    RftResult result;
    result.policy = base;
    for (const Question& q : bank) {
        for (int k = 0; k < samples_per_q; ++k) {
            const std::uint64_t s =
                derive_seed(seed, kTagRft, static_cast<std::uint64_t>(q.id), k);
            Trajectory traj = sample_trajectory(base, env, q, s);
            if (traj.reward == 1) {
                result.kept.push_back(std::move(traj));
            }
        }
    }
    if (result.kept.empty()) {
        result.no_positives_warning = true;
        return result;
    }
    const double inv = 1.0 / static_cast<double>(result.kept.size());
    for (int step = 0; step < bc_steps; ++step) {
        SparseGrad grad;
        for (const Trajectory& traj : result.kept) {
            // Minimizing mean -logprob: accumulate -grad_logprob / N.
            grad.add_scaled(grad_logprob(result.policy, traj), -inv);
        }
        apply_gradient(result.policy, grad, lr);
    }
    return result;
}

double estimate_pass_rate(const PolicyTable& policy, const EnvSpec& env, const Question& q,
                          int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("estimate_pass_rate: k must be >= 1");
    int correct = 0;
    for (int i = 0; i < k; ++i) {
        const std::uint64_t s = derive_seed(seed, kTagRate, static_cast<std::uint64_t>(q.id), i);
        correct += sample_trajectory(policy, env, q, s).reward;
    }
    return static_cast<double>(correct) / static_cast<double>(k);
}

std::vector<int> curate_bank(const std::vector<double>& rates, double lo, double hi) {
    if (lo < 0.0 || hi > 1.0 || !(lo < hi)) {
        throw std::invalid_argument("curate_bank: band must satisfy 0 <= lo < hi <= 1");
    }
    std::vector<int> kept;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (rates[i] > lo && rates[i] < hi) {
            kept.push_back(static_cast<int>(i));
        }
    }
    return kept;
}

TrajectoryPair select_pair(const RolloutGroup& group, Rng& rng) {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < group.rewards.size(); ++i) {
        (group.rewards[i] == 1 ? positives : negatives).push_back(i);
    }
    if (positives.empty() || negatives.empty()) {
        throw std::invalid_argument(
            "select_pair: group must contain at least one correct and one incorrect rollout");
    }
    TrajectoryPair pair;
    pair.positive_index =
        positives[uniform_int(rng, 0, static_cast<int>(positives.size()) - 1)];
    pair.negative_index =
        negatives[uniform_int(rng, 0, static_cast<int>(negatives.size()) - 1)];
    return pair;
}

std::vector<ContextKey> visited_contexts(const std::vector<const Trajectory*>& trajs) {
    std::set<ContextKey> keys;
    for (const Trajectory* traj : trajs) {
        keys.insert(traj->contexts.begin(), traj->contexts.end());
    }
    return std::vector<ContextKey>(keys.begin(), keys.end());
}

LossResult loss_l1(const PolicyTable& policy, const PolicyTable& policy_old,
                   const std::vector<Trajectory>& positives,
                   const std::vector<ContextKey>& contexts, double beta) {
    LossResult out;
    if (!positives.empty()) {
        const double inv = 1.0 / static_cast<double>(positives.size());
        for (const Trajectory& traj : positives) {
            out.data_term -= inv * logprob(policy, traj);
            out.grad.add_scaled(grad_logprob(policy, traj), -inv);
        }
    }
    KlResult kl = kl_value_and_grad(policy, policy_old, contexts);
    out.kl_term = kl.value;
    out.grad.add_scaled(kl.grad, beta);
    out.loss = out.data_term + beta * out.kl_term;
    return out;
}

LossResult loss_l2(const PolicyTable& policy, const PolicyTable& policy_old,
                   const std::vector<Trajectory>& negatives,
                   const std::vector<double>& coefficients,
                   const std::vector<ContextKey>& contexts, double beta) {
    if (negatives.size() != coefficients.size()) {
        throw std::invalid_argument("loss_l2: one coefficient per trajectory required");
    }
    LossResult out;
    if (!negatives.empty()) {
        const double inv = 1.0 / static_cast<double>(negatives.size());
        for (std::size_t i = 0; i < negatives.size(); ++i) {
            const double ratio = logprob(policy, negatives[i]) - logprob(policy_old, negatives[i]);
            out.data_term += inv * coefficients[i] * ratio;
            out.grad.add_scaled(grad_logprob(policy, negatives[i]), inv * coefficients[i]);
        }
    }
    KlResult kl = kl_value_and_grad(policy, policy_old, contexts);
    out.kl_term = kl.value;
    out.grad.add_scaled(kl.grad, beta);
    out.loss = out.data_term + beta * out.kl_term;
    return out;
}

LossResult loss_total_weighted(const PolicyTable& policy, const PolicyTable& policy_old,
                               const Trajectory& positive, const std::vector<double>& w_plus,
                               const Trajectory& negative, const std::vector<double>& w_minus,
                               double neg_shaping, double eta, double beta,
                               const std::vector<ContextKey>& contexts) {
    if (w_plus.size() != positive.tokens.size() || w_minus.size() != negative.tokens.size()) {
        throw std::invalid_argument("loss_total_weighted: one weight per token required");
    }
    LossResult out;
    double pos_term = 0.0;
    for (std::size_t t = 0; t < positive.tokens.size(); ++t) {
        const ContextKey ctx = positive.contexts[t];
        const std::vector<double> dist = action_dist(policy, ctx);
        const int a = positive.tokens[t];
        pos_term -= w_plus[t] * std::log(dist[a]);
        // d(-w log pi(a|c))/dlogits = -w * (onehot(a) - pi(.|c))
        auto& row = out.grad.row(ctx, policy.alphabet);
        for (int b = 0; b < policy.alphabet; ++b) {
            row[b] -= w_plus[t] * ((b == a ? 1.0 : 0.0) - dist[b]);
        }
    }
    double neg_term = 0.0;
    const double neg_scale = eta * neg_shaping;
    for (std::size_t t = 0; t < negative.tokens.size(); ++t) {
        const ContextKey ctx = negative.contexts[t];
        const std::vector<double> dist = action_dist(policy, ctx);
        const std::vector<double> dist_old = action_dist(policy_old, ctx);
        const int a = negative.tokens[t];
        neg_term += neg_scale * w_minus[t] * (std::log(dist[a]) - std::log(dist_old[a]));
        auto& row = out.grad.row(ctx, policy.alphabet);
        for (int b = 0; b < policy.alphabet; ++b) {
            row[b] += neg_scale * w_minus[t] * ((b == a ? 1.0 : 0.0) - dist[b]);
        }
    }
    KlResult kl = kl_value_and_grad(policy, policy_old, contexts);
    out.data_term = pos_term + neg_term;
    out.kl_term = kl.value;
    out.grad.add_scaled(kl.grad, beta);
    out.loss = out.data_term + beta * out.kl_term;
    return out;
}

LossResult loss_total(const PolicyTable& policy, const PolicyTable& policy_old,
                      const CreditTable& credit, const Trajectory& positive,
                      const Trajectory& negative, double p_hat, double eta, double beta,
                      const std::vector<ContextKey>& contexts) {
    const TokenWeights wp = omega_weights(token_scores(credit, positive));
    const TokenWeights wn = omega_weights(token_scores(credit, negative));
    return loss_total_weighted(policy, policy_old, positive, wp.omega_plus, negative,
                               wn.omega_minus, shape_negative_coefficient(p_hat), eta, beta,
                               contexts);
}

double greedy_success(const PolicyTable& policy, const EnvSpec& env,
                      const std::vector<Question>& bank) {
    if (bank.empty()) return 0.0;
    int correct = 0;
    for (const Question& q : bank) {
        correct += greedy_trajectory(policy, env, q).reward;
    }
    return static_cast<double>(correct) / static_cast<double>(bank.size());
}

namespace {

struct PreparedBatch {
    std::vector<RolloutGroup> kept;
    double mean_pass_rate = 0.0;
    std::vector<int> failed_question_ids;  // all-fail groups, for skill bookkeeping
};

PreparedBatch roll_out_batch(const TrainState& state, const std::vector<Question>& batch,
                             const EnvSpec& env, const TrainConfig& cfg) {
    PreparedBatch out;
    double rate_sum = 0.0;
    for (const Question& q : batch) {
        std::vector<Trajectory> trajs;
        trajs.reserve(cfg.rollouts);
        for (int k = 0; k < cfg.rollouts; ++k) {
            const std::uint64_t s =
                derive_seed(cfg.seed, kTagRollout, static_cast<std::uint64_t>(state.iteration),
                            (static_cast<std::uint64_t>(q.id) << 20) | static_cast<std::uint64_t>(k));
            Trajectory traj = sample_trajectory(state.policy, env, q, s);
            if (cfg.verifier_noise > 0.0 && traj.reward == 1) {
                Rng noise(derive_seed(cfg.seed, kTagNoise,
                                      static_cast<std::uint64_t>(state.iteration),
                                      (static_cast<std::uint64_t>(q.id) << 20) |
                                          static_cast<std::uint64_t>(k)));
                if (uniform01(noise) < cfg.verifier_noise) {
                    traj.reward = 0;
                }
            }
            trajs.push_back(std::move(traj));
        }
        RolloutGroup group = make_rollout_group(q.id, std::move(trajs));
        rate_sum += group.pass_rate;
        if (group.pass_rate == 0.0) {
            out.failed_question_ids.push_back(q.id);
        }
        if (group.pass_rate > 0.0 && group.pass_rate < 1.0) {
            out.kept.push_back(std::move(group));
        }
    }
    out.mean_pass_rate = batch.empty() ? 0.0 : rate_sum / static_cast<double>(batch.size());
    return out;
}

// REINFORCE baseline: batch-mean-centered rewards, absolute log-likelihood.
void reinforce_losses(const PolicyTable& policy, const PolicyTable& policy_old,
                      const PreparedBatch& batch, double beta, IterationMetrics& metrics,
                      SparseGrad& grad) {
    std::vector<const Trajectory*> used;
    for (const RolloutGroup& g : batch.kept) {
        for (const Trajectory& t : g.trajectories) {
            used.push_back(&t);
        }
    }
    double mean_reward = 0.0;
    for (const Trajectory* t : used) {
        mean_reward += t->reward;
    }
    mean_reward /= static_cast<double>(used.size());
    const double inv = 1.0 / static_cast<double>(used.size());
    double pos = 0.0;
    double neg = 0.0;
    for (const Trajectory* t : used) {
        const double adv = t->reward - mean_reward;
        const double term = -inv * adv * logprob(policy, *t);
        (t->reward == 1 ? pos : neg) += term;
        grad.add_scaled(grad_logprob(policy, *t), -inv * adv);
    }
    KlResult kl = kl_value_and_grad(policy, policy_old, visited_contexts(used));
    grad.add_scaled(kl.grad, beta);
    metrics.loss_positive = pos;
    metrics.loss_negative = neg;
    metrics.kl = kl.value;
    metrics.loss_total = pos + neg + beta * kl.value;
}

// Positives cloned with unit weight, negatives pushed down through the
// pi/pi_old ratio scaled by the advantage-mode coefficient.
void shaped_losses(const PolicyTable& policy, const PolicyTable& policy_old,
                   const PreparedBatch& batch, const TrainConfig& cfg,
                   IterationMetrics& metrics, SparseGrad& grad) {
    std::vector<const Trajectory*> used;
    std::vector<const Trajectory*> positives;
    std::vector<std::pair<const Trajectory*, double>> negatives;  // with coefficient
    for (const RolloutGroup& g : batch.kept) {
        for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
            used.push_back(&g.trajectories[i]);
            if (g.rewards[i] == 1) {
                positives.push_back(&g.trajectories[i]);
            } else {
                negatives.emplace_back(&g.trajectories[i],
                                       negative_coefficient(g, cfg.advantage_mode, i));
            }
        }
    }
    double pos = 0.0;
    const double inv_p = 1.0 / static_cast<double>(positives.size());
    for (const Trajectory* t : positives) {
        pos -= inv_p * logprob(policy, *t);
        grad.add_scaled(grad_logprob(policy, *t), -inv_p);
    }
    double neg = 0.0;
    const double inv_n = 1.0 / static_cast<double>(negatives.size());
    for (const auto& [t, coef] : negatives) {
        const double ratio = logprob(policy, *t) - logprob(policy_old, *t);
        neg += cfg.eta * inv_n * coef * ratio;
        grad.add_scaled(grad_logprob(policy, *t), cfg.eta * inv_n * coef);
    }
    KlResult kl = kl_value_and_grad(policy, policy_old, visited_contexts(used));
    grad.add_scaled(kl.grad, cfg.beta);
    metrics.loss_positive = pos;
    metrics.loss_negative = neg;
    metrics.kl = kl.value;
    metrics.loss_total = pos + neg + cfg.beta * kl.value;
}

// One selected pair per group; token weights come from the credit table for
// the full variant and are identically 1 for the behavior-cloning variant.
void pair_losses(const PolicyTable& policy, const PolicyTable& policy_old,
                 const CreditTable& credit, int iteration, const PreparedBatch& batch,
                 const TrainConfig& cfg, bool token_weights, IterationMetrics& metrics,
                 SparseGrad& grad) {
    struct PairPick {
        const RolloutGroup* group;
        TrajectoryPair pair;
    };
    std::vector<PairPick> picks;
    std::vector<const Trajectory*> used;
    for (const RolloutGroup& g : batch.kept) {
        Rng rng(derive_seed(cfg.seed, kTagPair, static_cast<std::uint64_t>(iteration),
                            static_cast<std::uint64_t>(g.question_id)));
        PairPick pick{&g, select_pair(g, rng)};
        used.push_back(&g.trajectories[pick.pair.positive_index]);
        used.push_back(&g.trajectories[pick.pair.negative_index]);
        picks.push_back(pick);
    }
    const std::vector<ContextKey> contexts = visited_contexts(used);
    const double inv = 1.0 / static_cast<double>(picks.size());
    double pos = 0.0;
    double neg = 0.0;
    for (const PairPick& pick : picks) {
        const Trajectory& y_pos = pick.group->trajectories[pick.pair.positive_index];
        const Trajectory& y_neg = pick.group->trajectories[pick.pair.negative_index];
        std::vector<double> w_plus(y_pos.tokens.size(), 1.0);
        std::vector<double> w_minus(y_neg.tokens.size(), 1.0);
        if (token_weights) {
            w_plus = omega_weights(token_scores(credit, y_pos)).omega_plus;
            w_minus = omega_weights(token_scores(credit, y_neg)).omega_minus;
        }
        const double coef =
            negative_coefficient(*pick.group, cfg.advantage_mode, pick.pair.negative_index);
        LossResult pair_loss =
            loss_total_weighted(policy, policy_old, y_pos, w_plus, y_neg, w_minus,
                                coef, cfg.eta, /*beta=*/0.0, {});
        // Recover the two data components for metrics.
        double pair_pos = 0.0;
        for (std::size_t t = 0; t < y_pos.tokens.size(); ++t) {
            pair_pos -= w_plus[t] * std::log(action_dist(policy, y_pos.contexts[t])
                                                 [static_cast<std::size_t>(y_pos.tokens[t])]);
        }
        pos += inv * pair_pos;
        neg += inv * (pair_loss.data_term - pair_pos);
        grad.add_scaled(pair_loss.grad, inv);
    }
    KlResult kl = kl_value_and_grad(policy, policy_old, contexts);
    grad.add_scaled(kl.grad, cfg.beta);
    metrics.loss_positive = pos;
    metrics.loss_negative = neg;
    metrics.kl = kl.value;
    metrics.loss_total = pos + neg + cfg.beta * kl.value;
}

}  // namespace

IterationMetrics train_step(TrainState& state, const std::vector<Question>& batch,
                            const std::vector<Question>& eval_bank, const EnvSpec& env,
                            const TrainConfig& cfg, const AblationFlags& flags) {
    variant_name(flags);  // reject unnamed flag combinations up front
    IterationMetrics metrics;
    metrics.iteration = state.iteration;
    state.policy_old = state.policy;

    const PreparedBatch prepared = roll_out_batch(state, batch, env, cfg);
    metrics.mean_pass_rate = prepared.mean_pass_rate;
    metrics.kept_groups = static_cast<int>(prepared.kept.size());
    metrics.all_fail_question_ids = prepared.failed_question_ids;

    if (prepared.kept.empty()) {
        metrics.skipped = true;
        metrics.greedy_success = greedy_success(state.policy, env, eval_bank);
        state.iteration += 1;
        return metrics;
    }

    // Credit model: compute this iteration's token weights from the
    // pre-update table, then fit it on all kept rollouts (warmed-up lr).
    CreditTable pre_update_credit = state.credit;
    if (flags.token_weights) {
        std::vector<Trajectory> labeled;
        for (const RolloutGroup& g : prepared.kept) {
            labeled.insert(labeled.end(), g.trajectories.begin(), g.trajectories.end());
        }
        double ce_sum = 0.0;
        for (const Trajectory& t : labeled) {
            ce_sum += ce_loss_and_grad(state.credit, t, t.reward).loss;
        }
        metrics.credit_loss = ce_sum / static_cast<double>(labeled.size());
        const double ramp =
            std::min(1.0, static_cast<double>(state.iteration + 1) /
                              static_cast<double>(cfg.warmup_steps));
        credit_update(state.credit, labeled, cfg.credit_lr * ramp);
    }

    SparseGrad grad;
    if (!flags.reward_shaping) {
        reinforce_losses(state.policy, state.policy_old, prepared, cfg.beta, metrics, grad);
    } else if (!flags.behavior_cloning) {
        shaped_losses(state.policy, state.policy_old, prepared, cfg, metrics, grad);
    } else {
        pair_losses(state.policy, state.policy_old, pre_update_credit, state.iteration,
                    prepared, cfg, flags.token_weights, metrics, grad);
    }
    apply_gradient(state.policy, grad, cfg.policy_lr);

    metrics.greedy_success = greedy_success(state.policy, env, eval_bank);
    state.iteration += 1;
    return metrics;
}

TrainResult train(const EnvSpec& env, const std::vector<Question>& bank,
                  const TrainConfig& cfg, const AblationFlags& flags) {
    validate_env(env);
    validate_train_config(cfg);
    variant_name(flags);
    if (bank.empty()) {
        throw std::invalid_argument("train: question bank is empty");
    }

    TrainResult result;
    RftResult rft = rft_init(make_uniform_policy(env.alphabet), env, bank, cfg.rft_samples,
                             cfg.rft_bc_steps, cfg.rft_lr, cfg.seed);
    result.rft_policy = rft.policy;
    result.rft_positives = rft.kept.size();
    result.rft_warning = rft.no_positives_warning;
    result.init_success = greedy_success(rft.policy, env, bank);

    std::vector<double> rates(bank.size(), 0.0);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        rates[i] = estimate_pass_rate(rft.policy, env, bank[i], cfg.rollouts, cfg.seed);
    }
    const std::vector<int> curated = curate_bank(rates, cfg.filter_lo, cfg.filter_hi);
    if (curated.empty()) {
        throw std::runtime_error(
            "train: pass-rate curation removed every question; widen the filter band");
    }
    result.curated_questions = static_cast<int>(curated.size());

    TrainState state;
    state.policy = rft.policy;
    state.policy_old = rft.policy;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<int> order = curated;
        Rng shuffle_rng(derive_seed(cfg.seed, kTagBatch, static_cast<std::uint64_t>(iter)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const std::size_t take =
            std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.batch_questions));
        std::vector<Question> batch;
        batch.reserve(take);
        for (std::size_t i = 0; i < take; ++i) {
            batch.push_back(bank[static_cast<std::size_t>(order[i])]);
        }

        IterationMetrics metrics = train_step(state, batch, bank, env, cfg, flags);
        for (int qid : metrics.all_fail_question_ids) {
            result.failure_counts[qid] += 1;
        }
        result.metrics.push_back(std::move(metrics));

        const bool eval_point = ((iter + 1) % cfg.eval_every == 0) || (iter + 1 == cfg.iterations);
        if (eval_point && metrics.greedy_success > result.best_success) {
            result.best_success = metrics.greedy_success;
            result.best_iteration = iter;
            result.best_policy = state.policy;
            result.best_credit = state.credit;
        }
    }

    result.policy = state.policy;
    result.credit = state.credit;
    result.final_success = greedy_success(state.policy, env, bank);
    if (result.best_iteration < 0) {
        result.best_success = result.final_success;
        result.best_iteration = cfg.iterations - 1;
        result.best_policy = state.policy;
        result.best_credit = state.credit;
    }
    return result;
}

std::vector<int> skill_augment(const std::map<int, int>& failure_counts,
                               const std::vector<Question>& bank, int threshold) {
    if (threshold < 1) throw std::invalid_argument("skill_augment: threshold must be >= 1");
    std::set<int> extra;
    for (const auto& [qid, count] : failure_counts) {
        if (count < threshold) continue;
        int skill = -1;
        for (const Question& q : bank) {
            if (q.id == qid) {
                skill = q.skill;
                break;
            }
        }
        if (skill < 0) continue;
        for (const Question& q : bank) {
            if (q.id != qid && q.skill == skill) {
                extra.insert(q.id);
            }
        }
    }
    return std::vector<int>(extra.begin(), extra.end());
}

}  // namespace orlab
