#include "orlab/bon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "orlab/mathutil.hpp"

namespace orlab {

namespace {

// Samples trajectories as lexicographic ranks, caching one cumulative action
// distribution per context so Monte-Carlo loops stay cheap.
class CachedSampler {
  public:
    CachedSampler(const PolicyTable& policy, const EnvSpec& env, const Question& q)
        : policy_(policy), env_(env), q_(q) {
        validate_env(env);
        if (policy.alphabet != env.alphabet) {
            throw std::invalid_argument("CachedSampler: policy alphabet does not match env");
        }
        probe_.question_id = q.id;
        probe_.tokens.assign(env.horizon, 0);
    }

    // (lexicographic rank, reward) of one sampled trajectory.
    std::pair<std::uint64_t, int> draw(Rng& rng) {
        prefix_.clear();
        std::uint64_t rank = 0;
        for (int t = 0; t < env_.horizon; ++t) {
            const ContextKey ctx = context_at(env_, q_, t, prefix_);
            const auto& cum = cumulative(ctx);
            const double u = uniform01(rng);
            int choice = env_.alphabet - 1;
            for (int a = 0; a < env_.alphabet; ++a) {
                if (u < cum[a]) {
                    choice = a;
                    break;
                }
            }
            prefix_.push_back(choice);
            rank = rank * static_cast<std::uint64_t>(env_.alphabet) +
                   static_cast<std::uint64_t>(choice);
        }
        probe_.tokens = prefix_;
        return {rank, verify(env_, q_, probe_)};
    }

  private:
    const std::vector<double>& cumulative(ContextKey ctx) {
        auto it = cache_.find(ctx);
        if (it == cache_.end()) {
            auto dist = action_dist(policy_, ctx);
            for (std::size_t a = 1; a < dist.size(); ++a) {
                dist[a] += dist[a - 1];
            }
            it = cache_.emplace(ctx, std::move(dist)).first;
        }
        return it->second;
    }

    const PolicyTable& policy_;
    const EnvSpec& env_;
    const Question& q_;
    std::vector<int> prefix_;
    Trajectory probe_;
    std::unordered_map<ContextKey, std::vector<double>> cache_;
};

SparseGrad scaled_copy(const SparseGrad& g, double s) {
    SparseGrad out;
    out.add_scaled(g, s);
    return out;
}

// Flattens to a sorted (context, action) -> value view for stable comparisons.
std::map<std::pair<ContextKey, int>, double> flatten(const SparseGrad& g) {
    std::map<std::pair<ContextKey, int>, double> out;
    for (const auto& [ctx, row] : g.rows) {
        for (std::size_t a = 0; a < row.size(); ++a) {
            out[{ctx, static_cast<int>(a)}] = row[a];
        }
    }
    return out;
}

// Elementwise max relative error; entries tiny relative to the vectors'
// overall scale are measured against that scale instead so that incidental
// cancellation cannot manufacture spurious error.
double max_rel_err(const SparseGrad& lhs, const SparseGrad& rhs) {
    const auto fl = flatten(lhs);
    const auto fr = flatten(rhs);
    double scale = 0.0;
    for (const auto& [k, v] : fl) {
        (void)k;
        scale = std::max(scale, std::abs(v));
    }
    for (const auto& [k, v] : fr) {
        (void)k;
        scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0) {
        return 0.0;
    }
    double worst = 0.0;
    auto visit = [&](const std::pair<ContextKey, int>& key) {
        const auto il = fl.find(key);
        const auto ir = fr.find(key);
        const double a = il == fl.end() ? 0.0 : il->second;
        const double b = ir == fr.end() ? 0.0 : ir->second;
        const double denom = std::max({std::abs(a), std::abs(b), 1e-9 * scale});
        worst = std::max(worst, std::abs(a - b) / denom);
    };
    for (const auto& [k, v] : fl) {
        (void)v;
        visit(k);
    }
    for (const auto& [k, v] : fr) {
        (void)v;
        visit(k);
    }
    return worst;
}

double dot(const SparseGrad& x, const SparseGrad& y) {
    double s = 0.0;
    const auto fx = flatten(x);
    for (const auto& [key, vx] : fx) {
        const auto it = y.rows.find(key.first);
        if (it == y.rows.end()) {
            continue;
        }
        s += vx * it->second[key.second];
    }
    return s;
}

}  // namespace

std::size_t bon_select_index(const std::vector<int>& rewards, Rng& rng) {
    if (rewards.empty()) {
        throw std::invalid_argument("bon_select: empty candidate set");
    }
    const int best = *std::max_element(rewards.begin(), rewards.end());
    std::size_t count = 0;
    for (int r : rewards) {
        count += (r == best) ? 1 : 0;
    }
    std::size_t pick = static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(count) - 1));
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        if (rewards[i] == best) {
            if (pick == 0) {
                return i;
            }
            --pick;
        }
    }
    throw std::logic_error("bon_select: unreachable");
}

const Trajectory& bon_select(const std::vector<Trajectory>& candidates, Rng& rng) {
    std::vector<int> rewards(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        rewards[i] = candidates[i].reward;
    }
    return candidates[bon_select_index(rewards, rng)];
}

std::vector<double> conditional_positive_law(const std::vector<double>& probs,
                                   const std::vector<int>& rewards) {
    if (probs.size() != rewards.size()) {
        throw std::invalid_argument("conditional_positive_law: probs/rewards size mismatch");
    }
    double p = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (rewards[i] == 1) {
            p += probs[i];
        }
    }
    if (p <= 0.0) {
        throw std::domain_error("conditional_positive_law: no positive mass");
    }
    std::vector<double> out(probs.size(), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (rewards[i] == 1) {
            out[i] = probs[i] / p;
        }
    }
    return out;
}

double pbon_density(double pi_s, int reward, double p, int n) {
    if (n < 1) {
        throw std::domain_error("pbon_density: n must be at least 1");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("pbon_density: success mass must lie strictly in (0, 1)");
    }
    if (!(pi_s >= 0.0 && pi_s <= 1.0)) {
        throw std::invalid_argument("pbon_density: trajectory probability outside [0, 1]");
    }
    if (reward == 1) {
        return pi_s * (1.0 - std::pow(1.0 - p, n)) / p;
    }
    return pi_s * std::pow(1.0 - p, n - 1);
}

double pibon_density(double cdf, double density, int n) {
    if (n < 1) {
        throw std::domain_error("pibon_density: n must be at least 1");
    }
    if (!(cdf >= 0.0 && cdf <= 1.0)) {
        throw std::invalid_argument("pibon_density: cdf outside [0, 1]");
    }
    return static_cast<double>(n) * std::pow(cdf, n - 1) * density;
}

double kl_bon(std::int64_t n) {
    if (n < 1) {
        throw std::domain_error("kl_bon: n must be at least 1");
    }
    const double nd = static_cast<double>(n);
    return std::log(nd) - (nd - 1.0) / nd;
}

std::int64_t max_n_for_kl_budget(double eps) {
    if (!(eps > 0.0)) {
        throw std::domain_error("max_n_for_kl_budget: budget must be positive");
    }
    const std::int64_t cap = std::int64_t{1} << 62;
    if (kl_bon(2) > eps) {
        return 1;
    }
    std::int64_t lo = 2;
    std::int64_t hi = 2;
    while (kl_bon(hi) <= eps) {
        lo = hi;
        if (hi >= cap / 2) {
            hi = cap;
            break;
        }
        hi *= 2;
    }
    if (kl_bon(hi) <= eps) {
        return hi;  // budget exceeds anything representable; saturate
    }
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (kl_bon(mid) <= eps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

GradConsistencyReport gradient_consistency_check(const PolicyTable& policy, const EnvSpec& env,
                                                 const Question& q, int n) {
    if (n < 1) {
        throw std::domain_error("gradient_consistency_check: n must be at least 1");
    }
    const auto entries = enumerate_trajectories(env, q);
    std::vector<double> prob(entries.size());
    std::vector<SparseGrad> score(entries.size());
    double p = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Trajectory traj = make_trajectory(env, q, entries[i].tokens);
        prob[i] = std::exp(logprob(policy, traj));
        score[i] = grad_logprob(policy, traj);
        if (entries[i].reward == 1) {
            p += prob[i];
        }
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("gradient_consistency_check: degenerate success mass");
    }

    // Masked score expectations; grad_p equals the positive one exactly.
    SparseGrad grad_pos, grad_neg;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        (entries[i].reward == 1 ? grad_pos : grad_neg).add_scaled(score[i], prob[i]);
    }

    // Left-hand sides: d/dtheta of each side's selection-density mass, summed
    // trajectory by trajectory via the product rule.  The branch coefficients
    // depend on theta through p, so each term carries c'(p) * grad_p.
    const double q1 = 1.0 - p;
    const double c_pos = (1.0 - std::pow(q1, n)) / p;
    const double c_neg = std::pow(q1, n - 1);
    const double dc_pos =
        (static_cast<double>(n) * std::pow(q1, n - 1) * p - (1.0 - std::pow(q1, n))) / (p * p);
    const double dc_neg = n == 1 ? 0.0 : -(static_cast<double>(n) - 1.0) * std::pow(q1, n - 2);
    SparseGrad lhs_pos, lhs_neg;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const bool positive = entries[i].reward == 1;
        auto& side = positive ? lhs_pos : lhs_neg;
        side.add_scaled(score[i], prob[i] * (positive ? c_pos : c_neg));
        side.add_scaled(grad_pos, prob[i] * (positive ? dc_pos : dc_neg));
    }

    // Right-hand sides with the closed-form coefficients: the positive side
    // multiplies the masked expectation, the negative side the conditional one.
    const double coef_pos_formula = static_cast<double>(n) * std::pow(q1, n - 1);
    const double coef_neg_formula = static_cast<double>(n) * std::pow(q1, n);
    const SparseGrad cond_neg = scaled_copy(grad_neg, 1.0 / q1);
    const SparseGrad rhs_pos = scaled_copy(grad_pos, coef_pos_formula);
    const SparseGrad rhs_neg = scaled_copy(cond_neg, coef_neg_formula);

    GradConsistencyReport report;
    report.n = n;
    report.p = p;
    report.max_rel_err_pos = max_rel_err(lhs_pos, rhs_pos);
    report.max_rel_err_neg = max_rel_err(lhs_neg, rhs_neg);
    report.coef_pos = dot(lhs_pos, grad_pos) / dot(grad_pos, grad_pos);
    report.coef_neg = dot(lhs_neg, cond_neg) / dot(cond_neg, cond_neg);
    report.ratio = report.coef_neg / report.coef_pos;
    report.ratio_abs_err = std::abs(report.ratio - q1);
    return report;
}

BonReport build_bon_report(const PolicyTable& policy, const EnvSpec& env, const Question& q,
                           int n, std::uint64_t draws, std::uint64_t seed) {
    if (n < 1) {
        throw std::domain_error("build_bon_report: n must be at least 1");
    }
    if (draws == 0) {
        throw std::invalid_argument("build_bon_report: need at least one draw");
    }
    const auto entries = enumerate_trajectories(env, q);
    BonReport report;
    report.n = n;
    report.draws = draws;
    report.target.resize(entries.size());
    report.empirical.assign(entries.size(), 0.0);

    double p = 0.0;
    std::vector<double> prob(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        prob[i] = std::exp(logprob_tokens(policy, env, q, entries[i].tokens));
        if (entries[i].reward == 1) {
            p += prob[i];
        }
    }
    report.success_prob = p;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        report.target[i] = pbon_density(prob[i], entries[i].reward, p, n);
        if (entries[i].reward == 0) {
            report.target_negative_mass += report.target[i];
        }
    }

    CachedSampler sampler(policy, env, q);
    Rng rng(derive_seed(seed, 0xB0AE, static_cast<std::uint64_t>(n)));
    std::vector<std::uint64_t> ranks(n);
    std::vector<int> rewards(n);
    for (std::uint64_t d = 0; d < draws; ++d) {
        for (int j = 0; j < n; ++j) {
            const auto [rank, reward] = sampler.draw(rng);
            ranks[j] = rank;
            rewards[j] = reward;
        }
        const std::size_t pick = bon_select_index(rewards, rng);
        report.empirical[ranks[pick]] += 1.0;
    }
    for (double& f : report.empirical) {
        f /= static_cast<double>(draws);
    }
    report.tv = total_variation(report.target, report.empirical);
    return report;
}

ConditionalBonResult mc_conditional_positive(const PolicyTable& policy, const EnvSpec& env,
                                             const Question& q, int n, std::uint64_t draws,
                                             std::uint64_t seed) {
    if (n < 1) {
        throw std::domain_error("mc_conditional_positive: n must be at least 1");
    }
    const auto entries = enumerate_trajectories(env, q);
    std::vector<double> prob(entries.size());
    std::vector<int> rewards_all(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        prob[i] = std::exp(logprob_tokens(policy, env, q, entries[i].tokens));
        rewards_all[i] = entries[i].reward;
    }

    ConditionalBonResult res;
    res.n = n;
    res.draws = draws;
    res.target = conditional_positive_law(prob, rewards_all);
    res.empirical.assign(entries.size(), 0.0);

    CachedSampler sampler(policy, env, q);
    Rng rng(derive_seed(seed, 0xC0DD, static_cast<std::uint64_t>(n)));
    std::vector<std::uint64_t> ranks(n);
    std::vector<int> rewards(n);
    for (std::uint64_t d = 0; d < draws; ++d) {
        for (int j = 0; j < n; ++j) {
            const auto [rank, reward] = sampler.draw(rng);
            ranks[j] = rank;
            rewards[j] = reward;
        }
        const std::size_t pick = bon_select_index(rewards, rng);
        if (rewards[pick] == 1) {
            res.empirical[ranks[pick]] += 1.0;
            ++res.kept;
        }
    }
    if (res.kept > 0) {
        for (double& f : res.empirical) {
            f /= static_cast<double>(res.kept);
        }
    }
    res.tv = total_variation(res.target, res.empirical);
    return res;
}

}  // namespace orlab
