#pragma once

// Synthetic fixed-horizon token environments with an exact rule verifier and
// full trajectory enumeration.  A question is answered by emitting `horizon`
// tokens from a small alphabet; the verifier scores the complete sequence
// with a binary reward.  Exact enumeration of the trajectory space is the
// backbone of every distributional oracle in the test suite.

#include <cstdint>
#include <string>
#include <vector>

namespace orlab {

enum class EnvKind {
    Summod,    // answer = (a + b) mod m; only the final token is graded
    Treepath,  // reward iff the token sum hits the target residue mod m
};

enum class ContextMode {
    PrevToken,   // context = (question, step, previous token)
    FullPrefix,  // context = (question, step, whole prefix); enumeration-capable envs only
};

// A context key packs (question id, step index, prefix code) into 64 bits:
// question id in bits 40..63, step in bits 32..39, code in bits 0..31.
using ContextKey = std::uint64_t;

inline ContextKey pack_context(std::uint32_t qid, std::uint32_t step, std::uint32_t code) {
    return (static_cast<std::uint64_t>(qid) << 40) |
           (static_cast<std::uint64_t>(step) << 32) |
           static_cast<std::uint64_t>(code);
}

struct EnvSpec {
    EnvKind kind = EnvKind::Summod;
    int alphabet = 6;  // token alphabet size A
    int horizon = 3;   // tokens per trajectory T
    // Summod: per-question moduli are drawn from [2, modulus].
    // Treepath: the shared modulus itself.
    int modulus = 5;
    ContextMode context_mode = ContextMode::PrevToken;
};

struct Question {
    int id = 0;
    int a = 0;       // Summod operand
    int b = 0;       // Summod operand
    int m = 2;       // modulus used by the verifier
    int target = 0;  // Treepath target residue
    int answer = 0;  // ground-truth final token (Summod) / residue (Treepath)
    int skill = 0;   // skill tag; the modulus for both environment kinds
};

struct Trajectory {
    int question_id = 0;
    std::vector<int> tokens;                // T action indices
    std::vector<ContextKey> contexts;       // context in which tokens[t] was chosen
    std::vector<ContextKey> post_contexts;  // context after tokens[t]; keys credit scores
    int reward = 0;
};

// Token sequence plus verified reward, as produced by full enumeration.
struct EnumEntry {
    std::vector<int> tokens;
    int reward = 0;
};

// Hard ceiling on |A|^T for any enumeration-backed operation.
inline constexpr std::uint64_t kEnumerationCap = 1u << 20;

// |A|^T, saturating at 2^63 to keep comparisons against the cap safe.
std::uint64_t space_size(const EnvSpec& env);
bool enumeration_capable(const EnvSpec& env);

// Throws std::invalid_argument when the environment's fields are unusable
// (degenerate alphabet/horizon, modulus out of range, full-prefix keying on
// a space too large to enumerate).
void validate_env(const EnvSpec& env);

// Context key after `step` tokens of `tokens` have been emitted.  The pre-
// action context of step t is context_at(..., t, ...); the post-action
// context is context_at(..., t + 1, ...).
ContextKey context_at(const EnvSpec& env, const Question& q, int step,
                      const std::vector<int>& tokens);

// Binary reward for a complete trajectory; pure in (env, q, tokens).
int verify(const EnvSpec& env, const Question& q, const Trajectory& traj);

// Builds the context/post-context sequences and verified reward for a raw
// token sequence.  Throws std::invalid_argument on horizon mismatch or
// out-of-alphabet tokens.
Trajectory make_trajectory(const EnvSpec& env, const Question& q,
                           const std::vector<int>& tokens);

// All |A|^T trajectories in lexicographic token order.  Throws
// std::length_error with the offending size when the space exceeds the cap.
std::vector<EnumEntry> enumerate_trajectories(const EnvSpec& env, const Question& q);

// Deterministic question bank; ids are 0..count-1 and the answer is always
// recomputable from the stored parameters.
std::vector<Question> question_bank(const EnvSpec& env, int count, std::uint64_t seed);

// Exact success probability of the uniform policy, by enumeration.
double uniform_success_probability(const EnvSpec& env, const Question& q);

void write_bank_csv(const std::string& path, const std::vector<Question>& bank);

const char* env_kind_name(EnvKind kind);
const char* context_mode_name(ContextMode mode);

}  // namespace orlab
