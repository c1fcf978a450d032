#include "orlab/policy.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "orlab/mathutil.hpp"
#include "orlab/rng.hpp"

namespace orlab {

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
    double m = logits[0];
    for (double l : logits) {
        if (l > m) m = l;
    }
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (double& p : out) {
        p /= z;
    }
    return out;
}

double log_prob_of(const std::vector<double>& logits, int action) {
    return logits[action] - logsumexp(std::span<const double>(logits));
}

// All contexts the policy can be queried at (pre-action contexts).
std::vector<ContextKey> reachable_contexts(const EnvSpec& env, const Question& q) {
    validate_env(env);
    std::vector<ContextKey> out;
    if (env.context_mode == ContextMode::PrevToken) {
        out.push_back(pack_context(static_cast<std::uint32_t>(q.id), 0, 0));
        for (int t = 1; t < env.horizon; ++t) {
            for (int tok = 0; tok < env.alphabet; ++tok) {
                out.push_back(pack_context(static_cast<std::uint32_t>(q.id),
                                           static_cast<std::uint32_t>(t),
                                           static_cast<std::uint32_t>(tok + 1)));
            }
        }
    } else {
        std::uint64_t codes = 1;
        for (int t = 0; t < env.horizon; ++t) {
            for (std::uint64_t code = 0; code < codes; ++code) {
                out.push_back(pack_context(static_cast<std::uint32_t>(q.id),
                                           static_cast<std::uint32_t>(t),
                                           static_cast<std::uint32_t>(code)));
            }
            codes *= static_cast<std::uint64_t>(env.alphabet);
        }
    }
    return out;
}

}  // namespace

std::vector<double>& SparseGrad::row(ContextKey ctx, int alphabet) {
    auto it = rows.find(ctx);
    if (it == rows.end()) {
        it = rows.emplace(ctx, std::vector<double>(alphabet, 0.0)).first;
    }
    return it->second;
}

void SparseGrad::add_scaled(const SparseGrad& other, double scale) {
    for (const auto& [ctx, src] : other.rows) {
        auto it = rows.find(ctx);
        if (it == rows.end()) {
            it = rows.emplace(ctx, std::vector<double>(src.size(), 0.0)).first;
        }
        auto& dst = it->second;
        if (dst.size() != src.size()) {
            throw std::invalid_argument("SparseGrad::add_scaled: row width mismatch");
        }
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i] += scale * src[i];
        }
    }
}

void SparseGrad::scale(double s) {
    for (auto& [ctx, row] : rows) {
        (void)ctx;
        for (double& v : row) {
            v *= s;
        }
    }
}

PolicyTable make_uniform_policy(int alphabet) {
    if (alphabet < 2) {
        throw std::invalid_argument("make_uniform_policy: alphabet must have at least 2 tokens");
    }
    PolicyTable p;
    p.alphabet = alphabet;
    return p;
}

std::vector<double> logits_at(const PolicyTable& policy, ContextKey ctx) {
    auto it = policy.logits.find(ctx);
    if (it != policy.logits.end()) {
        return it->second;
    }
    return std::vector<double>(policy.alphabet, 0.0);
}

std::vector<double>& ensure_row(PolicyTable& policy, ContextKey ctx) {
    auto it = policy.logits.find(ctx);
    if (it == policy.logits.end()) {
        it = policy.logits.emplace(ctx, std::vector<double>(policy.alphabet, 0.0)).first;
    }
    return it->second;
}

std::vector<double> action_dist(const PolicyTable& policy, ContextKey ctx) {
    if (policy.alphabet < 2) {
        throw std::invalid_argument("action_dist: policy has no alphabet");
    }
    return softmax(logits_at(policy, ctx));
}

Trajectory sample_trajectory(const PolicyTable& policy, const EnvSpec& env,
                             const Question& q, std::uint64_t seed) {
    validate_env(env);
    if (policy.alphabet != env.alphabet) {
        throw std::invalid_argument("sample_trajectory: policy alphabet does not match env");
    }
    Rng rng(seed);
    std::vector<int> tokens;
    tokens.reserve(env.horizon);
    for (int t = 0; t < env.horizon; ++t) {
        const ContextKey ctx = context_at(env, q, t, tokens);
        const auto dist = action_dist(policy, ctx);
        const double u = uniform01(rng);
        double acc = 0.0;
        int choice = env.alphabet - 1;
        for (int a = 0; a < env.alphabet; ++a) {
            acc += dist[a];
            if (u < acc) {
                choice = a;
                break;
            }
        }
        tokens.push_back(choice);
    }
    return make_trajectory(env, q, tokens);
}

Trajectory greedy_trajectory(const PolicyTable& policy, const EnvSpec& env, const Question& q) {
    validate_env(env);
    std::vector<int> tokens;
    tokens.reserve(env.horizon);
    for (int t = 0; t < env.horizon; ++t) {
        const ContextKey ctx = context_at(env, q, t, tokens);
        const auto logits = logits_at(policy, ctx);
        int best = 0;
        for (int a = 1; a < env.alphabet; ++a) {
            if (logits[a] > logits[best]) {
                best = a;
            }
        }
        tokens.push_back(best);
    }
    return make_trajectory(env, q, tokens);
}

double logprob(const PolicyTable& policy, const Trajectory& traj) {
    if (traj.tokens.size() != traj.contexts.size()) {
        throw std::invalid_argument("logprob: trajectory contexts out of sync with tokens");
    }
    double lp = 0.0;
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        lp += log_prob_of(logits_at(policy, traj.contexts[t]), traj.tokens[t]);
    }
    return lp;
}

double logprob_tokens(const PolicyTable& policy, const EnvSpec& env, const Question& q,
                      const std::vector<int>& tokens) {
    double lp = 0.0;
    std::vector<int> prefix;
    prefix.reserve(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const ContextKey ctx = context_at(env, q, static_cast<int>(t), prefix);
        prefix.push_back(tokens[t]);
        lp += log_prob_of(logits_at(policy, ctx), tokens[t]);
    }
    return lp;
}

SparseGrad grad_logprob(const PolicyTable& policy, const Trajectory& traj) {
    SparseGrad g;
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        const ContextKey ctx = traj.contexts[t];
        const auto dist = action_dist(policy, ctx);
        auto& row = g.row(ctx, policy.alphabet);
        for (int a = 0; a < policy.alphabet; ++a) {
            row[a] -= dist[a];
        }
        row[traj.tokens[t]] += 1.0;
    }
    return g;
}

void apply_gradient(PolicyTable& policy, const SparseGrad& grad, double lr) {
    for (const auto& [ctx, g] : grad.rows) {
        auto& row = ensure_row(policy, ctx);
        if (g.size() != row.size()) {
            throw std::invalid_argument("apply_gradient: row width mismatch");
        }
        for (std::size_t a = 0; a < row.size(); ++a) {
            row[a] -= lr * g[a];
        }
    }
}

double kl_divergence(const PolicyTable& pi_new, const PolicyTable& pi_old,
                     const std::vector<ContextKey>& contexts) {
    if (contexts.empty()) {
        return 0.0;
    }
    if (pi_new.alphabet != pi_old.alphabet) {
        throw std::invalid_argument("kl_divergence: alphabet mismatch");
    }
    double total = 0.0;
    for (ContextKey ctx : contexts) {
        const auto ln = logits_at(pi_new, ctx);
        const auto lo = logits_at(pi_old, ctx);
        const double zn = logsumexp(std::span<const double>(ln));
        const double zo = logsumexp(std::span<const double>(lo));
        double kl = 0.0;
        for (int a = 0; a < pi_new.alphabet; ++a) {
            const double lpn = ln[a] - zn;
            const double lpo = lo[a] - zo;
            kl += std::exp(lpn) * (lpn - lpo);
        }
        total += kl;
    }
    return total / static_cast<double>(contexts.size());
}

KlResult kl_value_and_grad(const PolicyTable& pi_new, const PolicyTable& pi_old,
                           const std::vector<ContextKey>& contexts) {
    KlResult res;
    if (contexts.empty()) {
        return res;
    }
    if (pi_new.alphabet != pi_old.alphabet) {
        throw std::invalid_argument("kl_value_and_grad: alphabet mismatch");
    }
    const double inv_n = 1.0 / static_cast<double>(contexts.size());
    for (ContextKey ctx : contexts) {
        const auto ln = logits_at(pi_new, ctx);
        const auto lo = logits_at(pi_old, ctx);
        const double zn = logsumexp(std::span<const double>(ln));
        const double zo = logsumexp(std::span<const double>(lo));
        std::vector<double> p(pi_new.alphabet), delta(pi_new.alphabet);
        double kl = 0.0;
        for (int a = 0; a < pi_new.alphabet; ++a) {
            delta[a] = (ln[a] - zn) - (lo[a] - zo);
            p[a] = std::exp(ln[a] - zn);
            kl += p[a] * delta[a];
        }
        res.value += kl * inv_n;
        auto& row = res.grad.row(ctx, pi_new.alphabet);
        for (int a = 0; a < pi_new.alphabet; ++a) {
            // d(KL)/d(logit_a) = p_a * (delta_a - KL); rows stay zero-sum.
            row[a] += inv_n * p[a] * (delta[a] - kl);
        }
    }
    return res;
}

PolicyTable kl_optimal_policy(const PolicyTable& pi0, const EnvSpec& env, const Question& q,
                              double alpha) {
    validate_env(env);
    if (alpha <= 0.0) {
        throw std::domain_error("kl_optimal_policy: alpha must be positive");
    }
    if (env.context_mode != ContextMode::FullPrefix) {
        throw std::invalid_argument(
            "kl_optimal_policy: requires full-prefix context keying; the optimum is not "
            "representable under previous-token keying");
    }
    if (pi0.alphabet != env.alphabet) {
        throw std::invalid_argument("kl_optimal_policy: policy alphabet does not match env");
    }
    const int A = env.alphabet;
    const int T = env.horizon;

    // Value of each prefix state under pi0, computed backward from the
    // terminal reward (undiscounted, reward only at the end).
    std::vector<std::uint64_t> level_size(T + 1);
    level_size[0] = 1;
    for (int t = 1; t <= T; ++t) {
        level_size[t] = level_size[t - 1] * static_cast<std::uint64_t>(A);
    }
    std::vector<double> value(level_size[T]);
    {
        Trajectory probe;
        probe.question_id = q.id;
        probe.tokens.assign(T, 0);
        for (std::uint64_t code = 0; code < level_size[T]; ++code) {
            std::uint64_t c = code;
            for (int i = 0; i < T; ++i) {
                probe.tokens[i] = static_cast<int>(c % static_cast<std::uint64_t>(A));
                c /= static_cast<std::uint64_t>(A);
            }
            value[code] = static_cast<double>(verify(env, q, probe));
        }
    }

    PolicyTable out;
    out.alphabet = A;
    std::vector<double> next = std::move(value);
    for (int t = T - 1; t >= 0; --t) {
        std::vector<double> cur(level_size[t]);
        for (std::uint64_t code = 0; code < level_size[t]; ++code) {
            const ContextKey ctx = pack_context(static_cast<std::uint32_t>(q.id),
                                                static_cast<std::uint32_t>(t),
                                                static_cast<std::uint32_t>(code));
            const auto dist0 = action_dist(pi0, ctx);
            std::vector<double> tilted(A);
            double v = 0.0;
            for (int a = 0; a < A; ++a) {
                const double qsa = next[code + static_cast<std::uint64_t>(a) * level_size[t]];
                v += dist0[a] * qsa;
                tilted[a] = std::log(dist0[a]) + qsa / alpha;
            }
            cur[code] = v;
            out.logits[ctx] = std::move(tilted);
        }
        next = std::move(cur);
    }
    return out;
}

double success_probability(const PolicyTable& policy, const EnvSpec& env, const Question& q) {
    const auto entries = enumerate_trajectories(env, q);
    double p = 0.0;
    for (const auto& e : entries) {
        if (e.reward == 1) {
            p += std::exp(logprob_tokens(policy, env, q, e.tokens));
        }
    }
    return p;
}

void randomize_policy(PolicyTable& policy, const EnvSpec& env, const Question& q,
                      double stddev, std::uint64_t seed) {
    if (policy.alphabet != env.alphabet) {
        throw std::invalid_argument("randomize_policy: policy alphabet does not match env");
    }
    Rng rng(derive_seed(seed, 0x9A11D));
    std::normal_distribution<double> noise(0.0, stddev);
    for (ContextKey ctx : reachable_contexts(env, q)) {
        auto& row = ensure_row(policy, ctx);
        for (double& l : row) {
            l = noise(rng);
        }
    }
}

namespace {

constexpr const char* kPolicyMagic = "orlab-policy-v1";

std::vector<std::pair<ContextKey, const std::vector<double>*>> sorted_rows(
    const std::unordered_map<ContextKey, std::vector<double>>& rows) {
    std::vector<std::pair<ContextKey, const std::vector<double>*>> sorted;
    sorted.reserve(rows.size());
    for (const auto& [ctx, row] : rows) {
        sorted.emplace_back(ctx, &row);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return sorted;
}

}  // namespace

void save_policy(const std::string& path, const PolicyTable& policy) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_policy: cannot open " + path);
    }
    out << kPolicyMagic << "\n";
    out << "alphabet " << policy.alphabet << "\n";
    out << "rows " << policy.logits.size() << "\n";
    char buf[64];
    for (const auto& [ctx, row] : sorted_rows(policy.logits)) {
        std::snprintf(buf, sizeof(buf), "%016" PRIx64, ctx);
        out << buf;
        for (double l : *row) {
            std::snprintf(buf, sizeof(buf), " %a", l);
            out << buf;
        }
        out << "\n";
    }
    if (!out) {
        throw std::runtime_error("save_policy: write failed for " + path);
    }
}

PolicyTable load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_policy: cannot open " + path);
    }
    std::string magic;
    std::getline(in, magic);
    if (magic != kPolicyMagic) {
        throw std::runtime_error("load_policy: unrecognized header in " + path);
    }
    std::string word;
    std::size_t rows = 0;
    PolicyTable policy;
    if (!(in >> word) || word != "alphabet" || !(in >> policy.alphabet) ||
        !(in >> word) || word != "rows" || !(in >> rows)) {
        throw std::runtime_error("load_policy: malformed header in " + path);
    }
    if (policy.alphabet < 2) {
        throw std::runtime_error("load_policy: bad alphabet in " + path);
    }
    for (std::size_t i = 0; i < rows; ++i) {
        std::string keyhex;
        if (!(in >> keyhex)) {
            throw std::runtime_error("load_policy: truncated table in " + path);
        }
        ContextKey ctx = 0;
        if (std::sscanf(keyhex.c_str(), "%" SCNx64, &ctx) != 1) {
            throw std::runtime_error("load_policy: bad context key in " + path);
        }
        std::vector<double> row(policy.alphabet);
        for (int a = 0; a < policy.alphabet; ++a) {
            if (!(in >> word)) {
                throw std::runtime_error("load_policy: truncated row in " + path);
            }
            char* end = nullptr;
            row[a] = std::strtod(word.c_str(), &end);
            if (end == word.c_str() || *end != '\0') {
                throw std::runtime_error("load_policy: bad logit value in " + path);
            }
        }
        policy.logits.emplace(ctx, std::move(row));
    }
    return policy;
}

}  // namespace orlab
