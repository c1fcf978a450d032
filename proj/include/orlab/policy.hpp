#pragma once

// Tabular softmax policy over context keys, with exact log-probability
// gradients, KL divergence between tables, the closed-form KL-regularized
// optimal policy, and a bit-exact text checkpoint format.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "orlab/envsim.hpp"

namespace orlab {

// Unseen contexts read as all-zero logits, i.e. the uniform distribution.
struct PolicyTable {
    int alphabet = 0;
    std::unordered_map<ContextKey, std::vector<double>> logits;
};

// Sparse per-(context, action) gradient.  Entries produced by score-function
// terms sum to zero within each context row.
struct SparseGrad {
    std::unordered_map<ContextKey, std::vector<double>> rows;

    std::vector<double>& row(ContextKey ctx, int alphabet);
    void add_scaled(const SparseGrad& other, double scale);
    void scale(double s);
};

PolicyTable make_uniform_policy(int alphabet);

// Logits for a context (zeros when unseen).
std::vector<double> logits_at(const PolicyTable& policy, ContextKey ctx);
std::vector<double>& ensure_row(PolicyTable& policy, ContextKey ctx);

// Softmax action distribution at a context; entries are positive and sum to 1.
std::vector<double> action_dist(const PolicyTable& policy, ContextKey ctx);

Trajectory sample_trajectory(const PolicyTable& policy, const EnvSpec& env,
                             const Question& q, std::uint64_t seed);

// Greedy argmax rollout; ties break toward the lowest token index.
Trajectory greedy_trajectory(const PolicyTable& policy, const EnvSpec& env, const Question& q);

// Sum over steps of log pi(token_t | context_t); always finite.
double logprob(const PolicyTable& policy, const Trajectory& traj);
double logprob_tokens(const PolicyTable& policy, const EnvSpec& env, const Question& q,
                      const std::vector<int>& tokens);

// Exact gradient of logprob with respect to the visited logit rows.
SparseGrad grad_logprob(const PolicyTable& policy, const Trajectory& traj);

// One gradient-descent step: logits[ctx][a] -= lr * grad[ctx][a].
void apply_gradient(PolicyTable& policy, const SparseGrad& grad, double lr);

// Mean over the given contexts of KL(pi_new(.|c) || pi_old(.|c)).
double kl_divergence(const PolicyTable& pi_new, const PolicyTable& pi_old,
                     const std::vector<ContextKey>& contexts);

struct KlResult {
    double value = 0.0;
    SparseGrad grad;  // with respect to pi_new's logits
};
KlResult kl_value_and_grad(const PolicyTable& pi_new, const PolicyTable& pi_old,
                           const std::vector<ContextKey>& contexts);

// Closed-form optimum of the KL-regularized objective: per reachable state,
// pi*(a|s) proportional to pi0(a|s) * exp(Q(s,a) / alpha), where Q comes from
// backward induction of the terminal reward under pi0 (undiscounted).
// Requires full-prefix context keying so the optimum is representable.
PolicyTable kl_optimal_policy(const PolicyTable& pi0, const EnvSpec& env, const Question& q,
                              double alpha);

// Exact success probability under the policy, by enumeration.
double success_probability(const PolicyTable& policy, const EnvSpec& env, const Question& q);

// Assigns independent normal(0, stddev) logits to every reachable context.
void randomize_policy(PolicyTable& policy, const EnvSpec& env, const Question& q,
                      double stddev, std::uint64_t seed);

// Versioned flat-text checkpoints; hexfloat fields make round-trips bit-exact.
void save_policy(const std::string& path, const PolicyTable& policy);
PolicyTable load_policy(const std::string& path);

}  // namespace orlab
