#include "orlab/envsim.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

#include "orlab/rng.hpp"

namespace orlab {

std::uint64_t space_size(const EnvSpec& env) {
    const std::uint64_t limit = std::uint64_t{1} << 63;
    std::uint64_t n = 1;
    for (int t = 0; t < env.horizon; ++t) {
        if (n > limit / static_cast<std::uint64_t>(env.alphabet)) {
            return limit;  // saturate; anything this large is over every cap
        }
        n *= static_cast<std::uint64_t>(env.alphabet);
    }
    return n;
}

bool enumeration_capable(const EnvSpec& env) {
    return space_size(env) <= kEnumerationCap;
}

void validate_env(const EnvSpec& env) {
    if (env.alphabet < 2) {
        throw std::invalid_argument("env: alphabet must have at least 2 tokens");
    }
    if (env.horizon < 1 || env.horizon > 255) {
        throw std::invalid_argument("env: horizon must be in [1, 255]");
    }
    if (env.modulus < 2) {
        throw std::invalid_argument("env: modulus must be at least 2");
    }
    if (env.kind == EnvKind::Summod && env.modulus > env.alphabet) {
        throw std::invalid_argument(
            "env: summod modulus exceeds alphabet; answer token would not exist");
    }
    if (env.context_mode == ContextMode::FullPrefix && !enumeration_capable(env)) {
        throw std::invalid_argument(
            "env: full-prefix keying requires an enumeration-capable space (|A|^T <= 2^20)");
    }
}

ContextKey context_at(const EnvSpec& env, const Question& q, int step,
                      const std::vector<int>& tokens) {
    if (step < 0 || step > env.horizon) {
        throw std::invalid_argument("context_at: step outside [0, horizon]");
    }
    if (static_cast<int>(tokens.size()) < step) {
        throw std::invalid_argument("context_at: fewer tokens than requested step");
    }
    std::uint32_t code = 0;
    if (env.context_mode == ContextMode::PrevToken) {
        code = step == 0 ? 0u : static_cast<std::uint32_t>(tokens[step - 1] + 1);
    } else {
        // Mixed-radix prefix code; fits in 32 bits because |A|^T <= 2^20.
        std::uint64_t c = 0;
        std::uint64_t base = 1;
        for (int i = 0; i < step; ++i) {
            c += static_cast<std::uint64_t>(tokens[i]) * base;
            base *= static_cast<std::uint64_t>(env.alphabet);
        }
        code = static_cast<std::uint32_t>(c);
    }
    return pack_context(static_cast<std::uint32_t>(q.id), static_cast<std::uint32_t>(step), code);
}

int verify(const EnvSpec& env, const Question& q, const Trajectory& traj) {
    if (static_cast<int>(traj.tokens.size()) != env.horizon) {
        throw std::invalid_argument("verify: trajectory length does not match horizon");
    }
    if (q.m < 2) {
        throw std::invalid_argument("verify: question modulus must be at least 2");
    }
    if (env.kind == EnvKind::Summod) {
        return traj.tokens.back() == q.answer ? 1 : 0;
    }
    long long sum = 0;
    for (int tok : traj.tokens) {
        sum += tok;
    }
    return static_cast<int>(sum % q.m) == q.target ? 1 : 0;
}

Trajectory make_trajectory(const EnvSpec& env, const Question& q,
                           const std::vector<int>& tokens) {
    validate_env(env);
    if (static_cast<int>(tokens.size()) != env.horizon) {
        throw std::invalid_argument("make_trajectory: token count does not match horizon");
    }
    for (int tok : tokens) {
        if (tok < 0 || tok >= env.alphabet) {
            throw std::invalid_argument("make_trajectory: token outside alphabet");
        }
    }
    Trajectory traj;
    traj.question_id = q.id;
    traj.tokens = tokens;
    traj.contexts.reserve(tokens.size());
    traj.post_contexts.reserve(tokens.size());
    for (int t = 0; t < env.horizon; ++t) {
        traj.contexts.push_back(context_at(env, q, t, tokens));
        traj.post_contexts.push_back(context_at(env, q, t + 1, tokens));
    }
    traj.reward = verify(env, q, traj);
    return traj;
}

std::vector<EnumEntry> enumerate_trajectories(const EnvSpec& env, const Question& q) {
    validate_env(env);
    const std::uint64_t count = space_size(env);
    if (count > kEnumerationCap) {
        throw std::length_error("enumerate_trajectories: |A|^T = " + std::to_string(count) +
                                " exceeds cap " + std::to_string(kEnumerationCap));
    }
    std::vector<EnumEntry> out;
    out.reserve(count);
    std::vector<int> tokens(env.horizon, 0);
    Trajectory probe;
    probe.question_id = q.id;
    for (std::uint64_t rank = 0; rank < count; ++rank) {
        // Lexicographic order: the last token varies fastest.
        std::uint64_t r = rank;
        for (int i = env.horizon - 1; i >= 0; --i) {
            tokens[i] = static_cast<int>(r % env.alphabet);
            r /= env.alphabet;
        }
        probe.tokens = tokens;
        out.push_back(EnumEntry{tokens, verify(env, q, probe)});
    }
    return out;
}

std::vector<Question> question_bank(const EnvSpec& env, int count, std::uint64_t seed) {
    validate_env(env);
    if (count < 1) {
        throw std::invalid_argument("question_bank: count must be positive");
    }
    if (count > (1 << 24)) {
        throw std::invalid_argument("question_bank: count exceeds the 24-bit id space");
    }
    Rng rng(derive_seed(seed, 0xBA11));
    std::vector<Question> bank;
    bank.reserve(count);
    for (int i = 0; i < count; ++i) {
        Question q;
        q.id = i;
        if (env.kind == EnvKind::Summod) {
            q.m = uniform_int(rng, 2, env.modulus);
            q.a = uniform_int(rng, 0, 99);
            q.b = uniform_int(rng, 0, 99);
            q.answer = (q.a + q.b) % q.m;
            q.target = 0;
        } else {
            q.m = env.modulus;
            q.a = 0;
            q.b = 0;
            q.target = uniform_int(rng, 0, q.m - 1);
            q.answer = q.target;
        }
        q.skill = q.m;
        bank.push_back(q);
    }
    return bank;
}

double uniform_success_probability(const EnvSpec& env, const Question& q) {
    const auto entries = enumerate_trajectories(env, q);
    std::uint64_t hits = 0;
    for (const auto& e : entries) {
        hits += static_cast<std::uint64_t>(e.reward);
    }
    return static_cast<double>(hits) / static_cast<double>(entries.size());
}

void write_bank_csv(const std::string& path, const std::vector<Question>& bank) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_bank_csv: cannot open " + path);
    }
    out << "id,a,b,m,target,answer,skill\n";
    for (const auto& q : bank) {
        out << q.id << ',' << q.a << ',' << q.b << ',' << q.m << ',' << q.target << ','
            << q.answer << ',' << q.skill << '\n';
    }
}

const char* env_kind_name(EnvKind kind) {
    return kind == EnvKind::Summod ? "summod" : "treepath";
}

const char* context_mode_name(ContextMode mode) {
    return mode == ContextMode::PrevToken ? "prev_token" : "full_prefix";
}

}  // namespace orlab
