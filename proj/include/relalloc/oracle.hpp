#pragma once

// Exact small-instance computations: beta-binomial enumeration of a scheme's
// Bayes risk, brute-force optimal fixed allocation, and Monte Carlo
// cross-checks of the closed-form constants.

#include <cstdint>
#include <vector>

#include "relalloc/core_model.hpp"
#include "relalloc/simulation.hpp"

namespace relalloc {

struct EnumerationBudget {
    std::int64_t max_paths = 10'000'000;
};

// Marginal probability of the success count: C(t,s) B(a+s, b+t-s) / B(a,b).
double beta_binomial_pmf(const BetaParams& prior, std::int64_t trials, std::int64_t successes);

struct ExactRiskResult {
    double risk = 0.0;
    double probability_mass = 0.0;  // should be 1 up to rounding
    std::int64_t paths = 0;
};

// Exact Bayes risk of the scheme at budget m, enumerating count vectors
// (stage one under the prior predictive, stage two under the stage-one
// posterior predictive).  Throws BudgetExceededError past max_paths.
ExactRiskResult exact_scheme_risk(const SystemSpec& spec, Scheme scheme, std::int64_t m,
                                  const EnumerationBudget& budget,
                                  const std::vector<std::vector<std::int64_t>>* custom_allocation
                                  = nullptr);

struct OptimalFixedResult {
    std::vector<std::int64_t> allocation;  // flattened component order
    double risk = 0.0;
};

// Brute-force minimum of the exact fixed-allocation risk over all component
// allocations summing to m; lexicographically first on ties.
OptimalFixedResult optimal_fixed_allocation(const SystemSpec& spec, std::int64_t m,
                                            const EnumerationBudget& budget);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t draws = 0;
};

// Prior-sampling estimate of E[(sum_i sqrt(V_i))^2] for a flat parallel
// system; compares against asymptotic_constant_parallel / b_constant.
McEstimate mc_constant_parallel(const std::vector<BetaParams>& priors, std::int64_t draws,
                                std::uint64_t seed, int threads = 0);

// Prior-sampling estimate of E[(sum_i sqrt(B_i Z_i))^2] for a parallel-series
// system; compares against asymptotic_constant_hybrid.
McEstimate mc_constant_hybrid(const SystemSpec& spec, std::int64_t draws, std::uint64_t seed,
                              int threads = 0);

}  // namespace relalloc
