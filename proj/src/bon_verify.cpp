#include "orlab/bon_verify.hpp"

#include <cmath>
#include <stdexcept>

#include "orlab/bon.hpp"
#include "orlab/envsim.hpp"
#include "orlab/mathutil.hpp"
#include "orlab/policy.hpp"
#include "orlab/rng.hpp"

namespace orlab {
namespace {

constexpr double kTvTol = 0.01;
constexpr double kNormTol = 1e-9;
constexpr double kMassTol = 1e-12;
constexpr double kQuadNormTol = 1e-6;
constexpr double kQuadKlTol = 1e-3;
constexpr double kIdentityTol = 1e-9;
constexpr double kRatioTol = 1e-12;

EnvSpec ternary_env() {
    EnvSpec env;
    env.kind = EnvKind::Treepath;
    env.alphabet = 3;
    env.horizon = 3;
    env.modulus = 3;
    return env;
}

EnvSpec binary_env(ContextMode mode = ContextMode::PrevToken) {
    EnvSpec env;
    env.kind = EnvKind::Treepath;
    env.alphabet = 2;
    env.horizon = 3;
    env.modulus = 2;
    env.context_mode = mode;
    return env;
}

Question treepath_question(const EnvSpec& env, int id, int target) {
    Question q;
    q.id = id;
    q.m = env.modulus;
    q.target = target;
    q.answer = target;
    q.skill = env.modulus;
    return q;
}

PolicyTable randomized(const EnvSpec& env, const Question& q, std::uint64_t seed) {
    PolicyTable policy = make_uniform_policy(env.alphabet);
    randomize_policy(policy, env, q, /*stddev=*/0.8, seed);
    return policy;
}

}  // namespace

void SuiteResult::add(const std::string& check_name, double measured, double tolerance) {
    const bool ok = std::isfinite(measured) && measured <= tolerance;
    checks.push_back(SuiteCheck{check_name, measured, tolerance, ok});
    pass = pass && ok;
}

SuiteResult suite_conditional_law(const BonVerifyOptions& opt) {
    SuiteResult suite;
    suite.name = "conditional_law_n_independence";
    const EnvSpec env = ternary_env();
    const Question q = treepath_question(env, 0, 1);
    const PolicyTable policy = randomized(env, q, derive_seed(opt.seed, 0x31));
    for (int n : opt.n_list) {
        if (n < 2) continue;
        const ConditionalBonResult res =
            mc_conditional_positive(policy, env, q, n, opt.draws, derive_seed(opt.seed, 0x32, n));
        suite.add("conditional_tv_n" + std::to_string(n), res.tv, kTvTol);
    }
    return suite;
}

SuiteResult suite_pbon(const BonVerifyOptions& opt) {
    SuiteResult suite;
    suite.name = "pbon_selection_density";
    const EnvSpec env = ternary_env();
    const Question q = treepath_question(env, 1, 2);
    const PolicyTable policy = randomized(env, q, derive_seed(opt.seed, 0x41));
    for (int n : opt.n_list) {
        const BonReport report =
            build_bon_report(policy, env, q, n, opt.draws, derive_seed(opt.seed, 0x42, n));
        suite.add("selection_tv_n" + std::to_string(n), report.tv, kTvTol);
    }

    // Synthetic ten-atom space with exact positive mass p: the density must
    // normalize for every (p, n) and the negative branch must carry (1-p)^n.
    const std::vector<double> pos_shape = {0.3, 0.7};
    const std::vector<double> neg_shape = {0.2, 0.5, 0.25, 0.04, 0.005, 0.003, 0.001, 0.001};
    for (int tenth = 1; tenth <= 9; ++tenth) {
        const double p = tenth / 10.0;
        for (int n : opt.n_list) {
            double total = 0.0;
            for (double s : pos_shape) total += pbon_density(p * s, 1, p, n);
            for (double s : neg_shape) total += pbon_density((1.0 - p) * s, 0, p, n);
            suite.add("normalization_p" + std::to_string(tenth) + "_n" + std::to_string(n),
                      std::abs(total - 1.0), kNormTol);
        }
    }
    double neg_mass = 0.0;
    for (double s : neg_shape) neg_mass += pbon_density(0.5 * s, 0, 0.5, 4);
    suite.add("negative_mass_p05_n4", std::abs(neg_mass - 0.0625), kMassTol);
    return suite;
}

SuiteResult suite_kl_quadrature(const BonVerifyOptions& opt) {
    SuiteResult suite;
    suite.name = "kl_closed_form";
    const int points = 100000;
    const double h = 1.0 / points;
    for (int n : opt.n_list) {
        if (n < 2) continue;
        // Uniform base density on [0, 1]: cdf(s) = s, density = 1.
        double mass = 0.0;
        double kl = 0.0;
        for (int i = 0; i <= points; ++i) {
            const double s = i * h;
            const double f = pibon_density(s, 1.0, n);
            const double weight = (i == 0 || i == points) ? 0.5 : 1.0;
            mass += weight * h * f;
            if (f > 0.0) {
                kl += weight * h * f * std::log(f);
            }
        }
        suite.add("quadrature_mass_n" + std::to_string(n), std::abs(mass - 1.0), kQuadNormTol);
        suite.add("quadrature_kl_n" + std::to_string(n), std::abs(kl - kl_bon(n)), kQuadKlTol);
    }
    return suite;
}

SuiteResult suite_gradient_consistency(const BonVerifyOptions& opt) {
    SuiteResult suite;
    suite.name = "gradient_consistency";
    const EnvSpec env = binary_env();
    const Question q = treepath_question(env, 2, 0);
    const PolicyTable policy = randomized(env, q, derive_seed(opt.seed, 0x51));
    for (int n : opt.n_list) {
        const GradConsistencyReport report = gradient_consistency_check(policy, env, q, n);
        suite.add("identity_pos_n" + std::to_string(n), report.max_rel_err_pos, kIdentityTol);
        suite.add("identity_neg_n" + std::to_string(n), report.max_rel_err_neg, kIdentityTol);
        suite.add("ratio_n" + std::to_string(n), report.ratio_abs_err, kRatioTol);
    }
    return suite;
}

SuiteResult suite_union_law(const BonVerifyOptions& opt) {
    SuiteResult suite;
    suite.name = "union_law";
    const EnvSpec env = binary_env();
    const Question q = treepath_question(env, 3, 1);
    const PolicyTable policy = randomized(env, q, derive_seed(opt.seed, 0x61));

    const std::vector<EnumEntry> entries = enumerate_trajectories(env, q);
    std::vector<double> probs(entries.size(), 0.0);
    std::vector<int> rewards(entries.size(), 0);
    double p = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        probs[i] = std::exp(logprob_tokens(policy, env, q, entries[i].tokens));
        rewards[i] = entries[i].reward;
        if (rewards[i] == 1) p += probs[i];
    }

    const std::vector<std::pair<int, int>> splits = {{2, 2}, {1, 3}};
    for (const auto& [n_left, n_right] : splits) {
        const int n_total = n_left + n_right;
        std::vector<double> target(entries.size(), 0.0);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            target[i] = pbon_density(probs[i], rewards[i], p, n_total);
        }

        // Two-stage sampling: best-of-n_left and best-of-n_right, then best-of-2.
        Rng rng(derive_seed(opt.seed, 0x62, n_left, n_right));
        std::vector<double> cumulative(probs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            cumulative[i] = acc;
        }
        auto draw_one = [&]() {
            const double u = uniform01(rng) * acc;
            std::size_t lo = 0;
            std::size_t hi = cumulative.size() - 1;
            while (lo < hi) {
                const std::size_t mid = (lo + hi) / 2;
                if (cumulative[mid] < u) {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            return lo;
        };
        auto best_of = [&](int count) {
            std::vector<std::size_t> picks(count);
            std::vector<int> rs(count);
            for (int i = 0; i < count; ++i) {
                picks[i] = draw_one();
                rs[i] = rewards[picks[i]];
            }
            return picks[bon_select_index(rs, rng)];
        };
        std::vector<double> empirical(entries.size(), 0.0);
        for (std::uint64_t d = 0; d < opt.draws; ++d) {
            const std::size_t a = best_of(n_left);
            const std::size_t b = best_of(n_right);
            const std::vector<int> rs = {rewards[a], rewards[b]};
            Rng& tie_rng = rng;
            const std::size_t winner = bon_select_index(rs, tie_rng) == 0 ? a : b;
            empirical[winner] += 1.0;
        }
        for (double& e : empirical) e /= static_cast<double>(opt.draws);
        suite.add("two_stage_tv_n" + std::to_string(n_left) + "_" + std::to_string(n_right),
                  total_variation(target, empirical), kTvTol);
    }
    return suite;
}

SuiteResult suite_kl_optimal_improvement(const BonVerifyOptions& opt) {
    SuiteResult suite;
    suite.name = "kl_optimal_improvement";
    const EnvSpec env = binary_env(ContextMode::FullPrefix);
    const Question q = treepath_question(env, 4, 0);
    const PolicyTable pi0 = randomized(env, q, derive_seed(opt.seed, 0x71));
    const double base = success_probability(pi0, env, q);
    for (std::size_t i = 0; i < opt.alphas.size(); ++i) {
        const PolicyTable tuned = kl_optimal_policy(pi0, env, q, opt.alphas[i]);
        const double improved = success_probability(tuned, env, q);
        // Improvement theorem: shortfall must be zero up to rounding.
        suite.add("improvement_alpha" + std::to_string(i), base - improved, 1e-12);
    }
    return suite;
}

std::vector<SuiteResult> run_bon_suites(const BonVerifyOptions& opt) {
    if (opt.n_list.empty()) {
        throw std::invalid_argument("run_bon_suites: n list must not be empty");
    }
    for (int n : opt.n_list) {
        if (n < 1) throw std::invalid_argument("run_bon_suites: n must be >= 1");
    }
    if (opt.draws < 1000) {
        throw std::invalid_argument("run_bon_suites: draw budget too small to be meaningful");
    }
    return {suite_conditional_law(opt), suite_pbon(opt), suite_kl_quadrature(opt),
            suite_gradient_consistency(opt), suite_union_law(opt),
            suite_kl_optimal_improvement(opt)};
}

}  // namespace orlab
