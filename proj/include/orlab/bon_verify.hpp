#pragma once

// Structured verification suites for the best-of-n math: each suite runs a
// batch of named numeric checks with pinned tolerances and reports measured
// values, so the CLI and the acceptance gate share one implementation.

#include <cstdint>
#include <string>
#include <vector>

namespace orlab {

struct SuiteCheck {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SuiteResult {
    std::string name;
    bool pass = true;
    std::vector<SuiteCheck> checks;

    void add(const std::string& check_name, double measured, double tolerance);
};

struct BonVerifyOptions {
    std::vector<int> n_list = {1, 2, 4, 8, 16};
    std::uint64_t draws = 200000;
    std::vector<double> alphas = {0.1, 1.0, 10.0};
    std::uint64_t seed = 2024;
};

// Selected-positive law is independent of n and equals pi(s)/p.
SuiteResult suite_conditional_law(const BonVerifyOptions& opt);

// Monte-Carlo selection frequencies match the closed-form selection density;
// the density normalizes exactly; the landmark negative mass (1-p)^n holds.
SuiteResult suite_pbon(const BonVerifyOptions& opt);

// Trapezoid quadrature of the continuous selection density: normalization and
// agreement of the numeric KL with log n - (n-1)/n.
SuiteResult suite_kl_quadrature(const BonVerifyOptions& opt);

// Enumeration check of the two gradient identities and the (1-p) ratio.
SuiteResult suite_gradient_consistency(const BonVerifyOptions& opt);

// Best-of-(n+m) equals best-of-2 over independent best-of-n and best-of-m.
SuiteResult suite_union_law(const BonVerifyOptions& opt);

// The KL-regularized closed-form optimum never lowers success probability.
SuiteResult suite_kl_optimal_improvement(const BonVerifyOptions& opt);

std::vector<SuiteResult> run_bon_suites(const BonVerifyOptions& opt);

}  // namespace orlab
