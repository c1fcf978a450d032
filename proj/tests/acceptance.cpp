// Acceptance gate: one binary, one pass/fail line per criterion, exit 0 only
// if every criterion holds.  Tolerances are pinned here as named constants.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "orlab/advantage.hpp"
#include "orlab/bon.hpp"
#include "orlab/config.hpp"
#include "orlab/credit.hpp"
#include "orlab/envsim.hpp"
#include "orlab/harness.hpp"
#include "orlab/mathutil.hpp"
#include "orlab/policy.hpp"
#include "orlab/rng.hpp"
#include "orlab/trainer.hpp"
#include "support/fd_check.hpp"

using namespace orlab;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances -----------------------------------------------------
constexpr double kTvTol = 0.01;              // Monte-Carlo total-variation budget
constexpr std::uint64_t kDraws = 200000;     // Monte-Carlo draws per check
constexpr double kSelectionTimeBudget = 30;  // seconds, conditional-independence
constexpr double kNormTol = 1e-9;            // analytic density normalization
constexpr double kKlQuadTol = 1e-3;          // quadrature vs closed form
constexpr double kIdentityTol = 1e-9;        // enumerated gradient identities
constexpr double kRatioTol = 1e-12;          // coefficient ratio vs (1-p)
constexpr double kFdTol = 1e-5;              // finite-difference relative error
constexpr int kFdInstances = 100;            // randomized instances per operation
constexpr double kTrainTarget = 0.9;         // greedy success reached in training
constexpr int kTrainSeedsNeeded = 4;         // out of the five pinned seeds
constexpr double kTrainTimeBudget = 300;     // seconds for all five runs
// Margins for the credit-signal criterion.  The measurement is fully seeded
// (train seed 1, sampling stream 99), so the gaps are exact constants; a
// calibration run measured incorrect-side 0.0142 and correct-side 0.0748, and
// the margins are pinned well inside those at roughly a 2.5x safety factor.
constexpr double kCreditGapIncorrect = 0.005;
constexpr double kCreditGapCorrect = 0.03;

int g_failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    if (!pass) {
        ++g_failures;
    }
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

EnvSpec treepath_env(int alphabet, int horizon, int modulus) {
    EnvSpec env;
    env.kind = EnvKind::Treepath;
    env.alphabet = alphabet;
    env.horizon = horizon;
    env.modulus = modulus;
    return env;
}

Question treepath_question(int m, int target = 0, int id = 0) {
    Question q;
    q.id = id;
    q.m = m;
    q.target = target;
    q.answer = target;
    q.skill = m;
    return q;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- criteria --------------------------------------------------------------

void criterion_conditional_independence() {
    const auto start = std::chrono::steady_clock::now();
    const EnvSpec env = treepath_env(3, 3, 3);
    const Question q = treepath_question(3);
    PolicyTable policy = make_uniform_policy(3);
    randomize_policy(policy, env, q, 0.8, 2024);
    double worst = 0.0;
    for (int n : {2, 16}) {
        const auto res = mc_conditional_positive(policy, env, q, n, kDraws, 909 + n);
        worst = std::max(worst, res.tv);
    }
    const double elapsed = seconds_since(start);
    const bool pass = worst <= kTvTol && elapsed < kSelectionTimeBudget;
    report(pass, "conditional-selection-independence",
           "max TV " + fmt(worst) + " (tol " + fmt(kTvTol) + ") at n in {2,16}, " +
               std::to_string(kDraws) + " draws, " + fmt(elapsed) + " s (budget " +
               fmt(kSelectionTimeBudget) + " s)");
}

void criterion_selection_density() {
    const EnvSpec env = treepath_env(3, 3, 3);
    const Question q = treepath_question(3);
    PolicyTable policy = make_uniform_policy(3);
    randomize_policy(policy, env, q, 0.8, 2025);
    double worst_tv = 0.0;
    double worst_mass_err = 0.0;
    for (int n : {1, 2, 4, 8}) {
        const auto rep = build_bon_report(policy, env, q, n, kDraws, 4100 + n);
        worst_tv = std::max(worst_tv, rep.tv);
        const double expect_neg = std::pow(1.0 - rep.success_prob, n);
        worst_mass_err =
            std::max(worst_mass_err, std::abs(rep.target_negative_mass - expect_neg));
    }
    // Analytic normalization over a synthetic two-positive/eight-negative space.
    const std::vector<double> pos_shape = {0.3, 0.7};
    const std::vector<double> neg_shape = {0.2, 0.5, 0.25, 0.04, 0.005, 0.003, 0.001, 0.001};
    double worst_norm = 0.0;
    for (double p : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        for (int n : {1, 2, 4, 8}) {
            double total = 0.0;
            for (double w : pos_shape) {
                total += pbon_density(w * p, 1, p, n);
            }
            for (double w : neg_shape) {
                total += pbon_density(w * (1.0 - p), 0, p, n);
            }
            worst_norm = std::max(worst_norm, std::abs(total - 1.0));
        }
    }
    // The all-failure checkpoint: mass 0.5^4 = 6.25% at p = 0.5, n = 4.
    double neg_mass = 0.0;
    for (double w : neg_shape) {
        neg_mass += pbon_density(w * 0.5, 0, 0.5, 4);
    }
    const double checkpoint_err = std::abs(neg_mass - 0.0625);
    const bool pass = worst_tv <= kTvTol && worst_norm <= kNormTol &&
                      worst_mass_err <= 1e-12 && checkpoint_err <= 1e-12;
    report(pass, "selection-density-exactness",
           "max TV " + fmt(worst_tv) + " (tol " + fmt(kTvTol) + "), max |norm-1| " +
               fmt(worst_norm) + " (tol " + fmt(kNormTol) + "), failure mass at p=0.5,n=4 " +
               fmt(neg_mass) + " (expected 0.0625)");
}

void criterion_kl_closed_form() {
    double worst = 0.0;
    for (int n : {2, 4, 8, 16}) {
        const int points = 100000;
        double kl = 0.0;
        for (int i = 0; i <= points; ++i) {
            const double s = static_cast<double>(i) / points;
            const double f = pibon_density(s, 1.0, n);
            const double term = f > 0.0 ? f * std::log(f) : 0.0;
            const double w = (i == 0 || i == points) ? 0.5 : 1.0;
            kl += w * term / points;
        }
        worst = std::max(worst, std::abs(kl - kl_bon(n)));
    }
    report(worst <= kKlQuadTol, "selection-divergence-closed-form",
           "max |quadrature - closed form| " + fmt(worst) + " (tol " + fmt(kKlQuadTol) +
               ") for n in {2,4,8,16}");
}

void criterion_gradient_consistency() {
    const EnvSpec env = treepath_env(2, 3, 2);
    const Question q = treepath_question(2);
    PolicyTable policy = make_uniform_policy(2);
    randomize_policy(policy, env, q, 0.8, 2026);
    double worst_identity = 0.0;
    double worst_ratio = 0.0;
    for (int n : {1, 2, 4, 8, 16}) {
        const auto rep = gradient_consistency_check(policy, env, q, n);
        worst_identity =
            std::max({worst_identity, rep.max_rel_err_pos, rep.max_rel_err_neg});
        worst_ratio = std::max(worst_ratio, rep.ratio_abs_err);
    }
    const bool pass = worst_identity <= kIdentityTol && worst_ratio <= kRatioTol;
    report(pass, "gradient-consistency",
           "max identity error " + fmt(worst_identity) + " (tol " + fmt(kIdentityTol) +
               "), max |ratio-(1-p)| " + fmt(worst_ratio) + " (tol " + fmt(kRatioTol) + ")");
}

void criterion_finite_difference() {
    const EnvSpec env = treepath_env(3, 3, 3);
    const Question q = treepath_question(3);
    double worst = 0.0;

    // grad_logprob
    for (int i = 0; i < kFdInstances; ++i) {
        PolicyTable policy = make_uniform_policy(3);
        randomize_policy(policy, env, q, 0.8, 10000 + i);
        const Trajectory traj = sample_trajectory(policy, env, q, 20000 + i);
        const SparseGrad grad = grad_logprob(policy, traj);
        worst = std::max(worst, testsupport::max_rel_fd_err_policy(
                                    policy, grad, [&](const PolicyTable& table) {
                                        return logprob(table, traj);
                                    }));
    }
    const double worst_logprob = worst;

    // ce_loss_and_grad
    double worst_ce = 0.0;
    {
        const EnvSpec senv = default_experiment_config().env;
        const auto bank = question_bank(senv, 4, 11);
        Rng rng(31);
        for (int i = 0; i < kFdInstances; ++i) {
            const Question& cq = bank[static_cast<std::size_t>(i) % bank.size()];
            const PolicyTable uniform = make_uniform_policy(senv.alphabet);
            const Trajectory traj = sample_trajectory(uniform, senv, cq, 30000 + i);
            CreditTable credit;
            for (ContextKey ctx : traj.post_contexts) {
                credit.scores[ctx] = uniform01(rng) * 3.0 - 1.5;
            }
            const int reward = i % 2;
            const CeResult res = ce_loss_and_grad(credit, traj, reward);
            worst_ce = std::max(worst_ce, testsupport::max_rel_fd_err_credit(
                                              credit, res.grad, [&](const CreditTable& table) {
                                                  return ce_loss_and_grad(table, traj, reward)
                                                      .loss;
                                              }));
        }
    }

    // the three policy losses
    double worst_l1 = 0.0;
    double worst_l2 = 0.0;
    double worst_total = 0.0;
    {
        Rng rng(77);
        for (int i = 0; i < kFdInstances; ++i) {
            PolicyTable policy = make_uniform_policy(3);
            PolicyTable policy_old = make_uniform_policy(3);
            randomize_policy(policy, env, q, 0.8, 40000 + i);
            randomize_policy(policy_old, env, q, 0.8, 50000 + i);
            std::vector<Trajectory> pos;
            std::vector<Trajectory> neg;
            for (int k = 0; k < 2; ++k) {
                pos.push_back(sample_trajectory(policy, env, q, 60000 + 10 * i + k));
                neg.push_back(sample_trajectory(policy, env, q, 70000 + 10 * i + k));
            }
            std::vector<const Trajectory*> all;
            for (const auto& t : pos) {
                all.push_back(&t);
            }
            for (const auto& t : neg) {
                all.push_back(&t);
            }
            const auto contexts = visited_contexts(all);
            const double beta = 0.05;

            const LossResult r1 = loss_l1(policy, policy_old, pos, contexts, beta);
            worst_l1 = std::max(worst_l1, testsupport::max_rel_fd_err_policy(
                                              policy, r1.grad, [&](const PolicyTable& table) {
                                                  return loss_l1(table, policy_old, pos,
                                                                 contexts, beta)
                                                      .loss;
                                              }));

            const std::vector<double> coef = {0.3 + 0.5 * uniform01(rng),
                                              0.3 + 0.5 * uniform01(rng)};
            const LossResult r2 = loss_l2(policy, policy_old, neg, coef, contexts, beta);
            worst_l2 = std::max(worst_l2, testsupport::max_rel_fd_err_policy(
                                              policy, r2.grad, [&](const PolicyTable& table) {
                                                  return loss_l2(table, policy_old, neg, coef,
                                                                 contexts, beta)
                                                      .loss;
                                              }));

            CreditTable credit;
            for (const auto* t : all) {
                for (ContextKey ctx : t->post_contexts) {
                    credit.scores[ctx] = uniform01(rng) * 3.0 - 1.5;
                }
            }
            const double p_hat = 0.25 + 0.5 * uniform01(rng);
            const LossResult rt = loss_total(policy, policy_old, credit, pos[0], neg[0], p_hat,
                                             1.0, beta, contexts);
            worst_total =
                std::max(worst_total, testsupport::max_rel_fd_err_policy(
                                          policy, rt.grad, [&](const PolicyTable& table) {
                                              return loss_total(table, policy_old, credit,
                                                                pos[0], neg[0], p_hat, 1.0,
                                                                beta, contexts)
                                                  .loss;
                                          }));
        }
    }
    const double overall =
        std::max({worst_logprob, worst_ce, worst_l1, worst_l2, worst_total});
    report(overall <= kFdTol, "finite-difference-gradients",
           "max relative error " + fmt(overall) + " (tol " + fmt(kFdTol) + ") over " +
               std::to_string(kFdInstances) +
               " instances each [logprob " + fmt(worst_logprob) + ", ce " + fmt(worst_ce) +
               ", pos-loss " + fmt(worst_l1) + ", neg-loss " + fmt(worst_l2) + ", pair-loss " +
               fmt(worst_total) + "]");
}

void criterion_weight_algebra() {
    bool ok = true;
    double worst_sym = 0.0;
    for (int i = -20000; i <= 20000; ++i) {
        const double w = static_cast<double>(i) * 1e-3;
        const auto ww = omega_weights({w});
        const double plus = ww.omega_plus[0];
        const double minus = ww.omega_minus[0];
        ok = ok && plus * minus == 0.0;
        ok = ok && plus >= 0.0 && plus < 1.0 && minus >= 0.0 && minus < 1.0;
        const auto mirrored = omega_weights({-w});
        ok = ok && plus == mirrored.omega_minus[0];
        worst_sym = std::max(worst_sym, std::abs(plus - mirrored.omega_minus[0]));
    }
    report(ok, "weight-algebra",
           "40001-point grid on [-20,20]: product zero, range [0,1), mirror symmetry exact "
           "(max dev " +
               fmt(worst_sym) + ")");
}

void criterion_training_improvement() {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig base = default_experiment_config();
    const auto bank = question_bank(base.env, base.bank_count, base.bank_seed);
    int reached = 0;
    bool all_had_headroom = true;
    std::string per_seed;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        TrainConfig cfg = base.train;
        cfg.seed = seed;
        const TrainResult res = train(base.env, bank, cfg, AblationFlags{});
        const bool hit = res.best_success >= kTrainTarget;
        reached += hit ? 1 : 0;
        all_had_headroom = all_had_headroom && res.init_success < kTrainTarget;
        per_seed += (per_seed.empty() ? "" : ", ") + std::string("seed") +
                    std::to_string(seed) + " " + fmt(res.init_success) + "->" +
                    fmt(res.best_success);
    }
    const double elapsed = seconds_since(start);
    const bool pass =
        reached >= kTrainSeedsNeeded && all_had_headroom && elapsed < kTrainTimeBudget;
    report(pass, "training-improvement",
           std::to_string(reached) + "/5 seeds reached best >= " + fmt(kTrainTarget) +
               " within " + std::to_string(base.train.iterations) + " iterations (need " +
               std::to_string(kTrainSeedsNeeded) + "), all inits below target: " +
               (all_had_headroom ? "yes" : "no") + ", " + fmt(elapsed) + " s (budget " +
               fmt(kTrainTimeBudget) + " s) [" + per_seed + "]");
}

void criterion_ablation_ordering() {
    ExperimentConfig cfg = default_experiment_config();
    const fs::path out = fs::temp_directory_path() / "orlab_acceptance_ablation";
    fs::remove_all(out);
    cfg.out_dir = out.string();
    std::ostringstream log;
    const int rc = run_ablation(cfg, log);
    const std::string csv = slurp(out / "ablation.csv");
    std::istringstream lines(csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) {
        rows.push_back(line);
    }
    bool shape_ok = rc == 0 && rows.size() == 5 &&
                    rows[0].rfind("variant,", 0) == 0 &&
                    rows[1].rfind("reinforce,", 0) == 0 &&
                    rows[2].rfind("reward_shaping,", 0) == 0 &&
                    rows[3].rfind("behavior_cloning,", 0) == 0 &&
                    rows[4].rfind("full,", 0) == 0;
    auto median_of_row = [](const std::string& row) {
        const auto pos = row.find_last_of(',');
        return std::stod(row.substr(pos + 1));
    };
    double reinforce_med = 0.0;
    double full_med = 0.0;
    std::string medians = "unreadable";
    if (shape_ok) {
        reinforce_med = median_of_row(rows[1]);
        full_med = median_of_row(rows[4]);
        medians = "medians reinforce " + fmt(reinforce_med) + ", reward_shaping " +
                  fmt(median_of_row(rows[2])) + ", behavior_cloning " +
                  fmt(median_of_row(rows[3])) + ", full " + fmt(full_med);
    }
    const bool pass = shape_ok && full_med >= reinforce_med;
    report(pass, "ablation-ordering",
           "four-variant sweep over 5 seeds; " + medians +
               " (require full >= reinforce; strict monotonicity reported, not asserted)");
    fs::remove_all(out);
}

void criterion_credit_signal() {
    const ExperimentConfig base = default_experiment_config();
    const auto bank = question_bank(base.env, base.bank_count, base.bank_seed);
    TrainConfig cfg = base.train;
    cfg.seed = 1;
    const TrainResult res = train(base.env, bank, cfg, AblationFlags{});
    double inc_ans = 0.0;
    double inc_scr = 0.0;
    double cor_ans = 0.0;
    double cor_scr = 0.0;
    std::int64_t n_inc_ans = 0;
    std::int64_t n_inc_scr = 0;
    std::int64_t n_cor_ans = 0;
    std::int64_t n_cor_scr = 0;
    for (const auto& q : bank) {
        for (int k = 0; k < 32; ++k) {
            const Trajectory traj = sample_trajectory(
                res.rft_policy, base.env, q,
                derive_seed(99, 0xACCE, static_cast<std::uint64_t>(q.id),
                            static_cast<std::uint64_t>(k)));
            const auto scores = token_scores(res.credit, traj);
            const std::size_t last = scores.size() - 1;
            for (std::size_t t = 0; t < scores.size(); ++t) {
                const double s01 = sigmoid(scores[t]);
                if (traj.reward == 1) {
                    if (t == last) {
                        cor_ans += s01;
                        ++n_cor_ans;
                    } else {
                        cor_scr += s01;
                        ++n_cor_scr;
                    }
                } else {
                    if (t == last) {
                        inc_ans += s01;
                        ++n_inc_ans;
                    } else {
                        inc_scr += s01;
                        ++n_inc_scr;
                    }
                }
            }
        }
    }
    inc_ans /= static_cast<double>(n_inc_ans);
    inc_scr /= static_cast<double>(n_inc_scr);
    cor_ans /= static_cast<double>(n_cor_ans);
    cor_scr /= static_cast<double>(n_cor_scr);
    const double gap_incorrect = inc_scr - inc_ans;  // answer scored lower when wrong
    const double gap_correct = cor_ans - cor_scr;    // answer scored higher when right
    const bool pass =
        gap_incorrect > kCreditGapIncorrect && gap_correct > kCreditGapCorrect;
    report(pass, "credit-signal",
           "incorrect: answer " + fmt(inc_ans) + " vs scratch " + fmt(inc_scr) + " (gap " +
               fmt(gap_incorrect) + " > " + fmt(kCreditGapIncorrect) + "); correct: answer " +
               fmt(cor_ans) + " vs scratch " + fmt(cor_scr) + " (gap " + fmt(gap_correct) +
               " > " + fmt(kCreditGapCorrect) + ")");
}

void criterion_run_determinism() {
    const fs::path out1 = fs::temp_directory_path() / "orlab_acceptance_det_a";
    const fs::path out2 = fs::temp_directory_path() / "orlab_acceptance_det_b";
    fs::remove_all(out1);
    fs::remove_all(out2);
    ExperimentConfig cfg = default_experiment_config();
    std::ostringstream log;
    cfg.out_dir = out1.string();
    const int rc1 = run_experiment(cfg, log);
    cfg.out_dir = out2.string();
    const int rc2 = run_experiment(cfg, log);
    const bool metrics_same = slurp(out1 / "metrics.jsonl") == slurp(out2 / "metrics.jsonl");
    const bool summary_same = slurp(out1 / "summary.json") == slurp(out2 / "summary.json");
    const bool nonempty = !slurp(out1 / "metrics.jsonl").empty();
    const bool pass = rc1 == 0 && rc2 == 0 && metrics_same && summary_same && nonempty;
    report(pass, "run-determinism",
           std::string("two identical runs: metrics stream ") +
               (metrics_same ? "byte-identical" : "DIFFER") + ", summary " +
               (summary_same ? "byte-identical" : "DIFFER"));
    fs::remove_all(out1);
    fs::remove_all(out2);
}

}  // namespace

int main() {
    criterion_conditional_independence();
    criterion_selection_density();
    criterion_kl_closed_form();
    criterion_gradient_consistency();
    criterion_finite_difference();
    criterion_weight_algebra();
    criterion_training_improvement();
    criterion_ablation_ordering();
    criterion_credit_signal();
    criterion_run_determinism();
    if (g_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return 1;
}
