#pragma once

// Best-of-n selection and its exact distributional consequences: the
// conditional law of the selected positive, the discrete selection density,
// the continuous order-statistic density, the KL cost of selection, and an
// enumeration-backed check that the two closed-form gradient coefficients
// (and their (1 - p) ratio) are exact.

#include <cstdint>
#include <vector>

#include "orlab/envsim.hpp"
#include "orlab/policy.hpp"
#include "orlab/rng.hpp"

namespace orlab {

// Index of the selected candidate: uniform among those with maximal reward.
std::size_t bon_select_index(const std::vector<int>& rewards, Rng& rng);
const Trajectory& bon_select(const std::vector<Trajectory>& candidates, Rng& rng);

// Law of the selected sample conditioned on success: probs[i] / p on the
// positive entries (p = total positive mass), zero elsewhere.  Independent of
// the number of candidates.  Throws std::domain_error when p <= 0.
std::vector<double> conditional_positive_law(const std::vector<double>& probs,
                                   const std::vector<int>& rewards);

// Discrete best-of-n selection density for one trajectory with base
// probability pi_s and binary reward, given success mass p in (0, 1):
//   reward 1: pi_s * (1 - (1-p)^n) / p
//   reward 0: pi_s * (1-p)^(n-1)
double pbon_density(double pi_s, int reward, double p, int n);

// Continuous analogue on a scored space: n * cdf^(n-1) * density.
double pibon_density(double cdf, double density, int n);

// KL(best-of-n law || base law) for a continuous score: log n - (n-1)/n.
double kl_bon(std::int64_t n);

// Largest n whose selection KL stays within the budget; saturates at 2^62.
std::int64_t max_n_for_kl_budget(double eps);

struct GradConsistencyReport {
    int n = 1;
    double p = 0.0;                // exact success mass under the base policy
    double max_rel_err_pos = 0.0;  // positive-side identity, elementwise
    double max_rel_err_neg = 0.0;  // negative-side identity, elementwise
    double coef_pos = 0.0;         // measured positive coefficient ~ n(1-p)^(n-1)
    double coef_neg = 0.0;         // measured negative coefficient ~ n(1-p)^n
    double ratio = 0.0;            // coef_neg / coef_pos, expected (1 - p)
    double ratio_abs_err = 0.0;    // |ratio - (1 - p)|
};

// By exact enumeration: differentiates the selection density trajectory by
// trajectory (product rule through the p-dependent branch coefficients) and
// compares each side's summed gradient against its closed-form coefficient
// times the base-policy score expectation over that side (positives: masked
// expectation; negatives: conditional expectation).  Throws std::domain_error
// when the base success mass is degenerate.
GradConsistencyReport gradient_consistency_check(const PolicyTable& policy, const EnvSpec& env,
                                                 const Question& q, int n);

struct BonReport {
    int n = 1;
    std::uint64_t draws = 0;
    double success_prob = 0.0;          // exact p by enumeration
    double tv = 0.0;                    // empirical selection law vs target
    double target_negative_mass = 0.0;  // should equal (1-p)^n
    std::vector<double> target;         // selection density over lex-ordered trajectories
    std::vector<double> empirical;      // Monte-Carlo selection frequencies
};

// Monte-Carlo best-of-n selection (all-negative draws fall back to a uniform
// pick among the candidates) against the exact selection density.
BonReport build_bon_report(const PolicyTable& policy, const EnvSpec& env, const Question& q,
                           int n, std::uint64_t draws, std::uint64_t seed);

struct ConditionalBonResult {
    int n = 1;
    std::uint64_t draws = 0;
    std::uint64_t kept = 0;      // draws whose selected sample was positive
    double tv = 0.0;
    std::vector<double> target;  // conditional_positive_law over lex-ordered trajectories
    std::vector<double> empirical;
};

// Empirical law of the selected sample conditioned on success.
ConditionalBonResult mc_conditional_positive(const PolicyTable& policy, const EnvSpec& env,
                                             const Question& q, int n, std::uint64_t draws,
                                             std::uint64_t seed);

}  // namespace orlab
