#pragma once

// Posterior variances of the system reliability, the per-component risk
// weights U_i, the per-subsystem weights w_i and constants B_i, and the
// closed-form limits the sequential schemes converge to.

#include <cstddef>
#include <vector>

#include "relalloc/core_model.hpp"

namespace relalloc {

// Snapshot of every weight the hybrid scheme consumes, for reporting.
struct RiskWeights {
    std::vector<std::vector<double>> u;  // per component, grouped like the spec
    std::vector<double> w;               // per subsystem
    std::vector<double> b;               // per subsystem, data-free constants
};

// U_i = E[ p_i(1-p_i) prod_{j!=i} (1-p_j)^2 | data ] for one parallel group.
// The cross factors are the posterior second moments of (1-p_j).
double u_weight(const std::vector<BetaParams>& priors,
                const std::vector<ComponentCounts>& counts, std::size_t i);

// Exact posterior variance of the system reliability under any topology.
double posterior_variance(const SystemSpec& spec, const ObservationLedger& ledger);

// w_i = E[ prod_{l!=i} p_l^2 | data ] for a parallel-series system, built from
// the posterior group second moments E[p_l^2] = 1 - 2 prod E[1-p_lj] + prod E[(1-p_lj)^2].
double w_weight(const SystemSpec& spec, const ObservationLedger& ledger, std::size_t i);

// Variant that divides the linear term of E[p_l^2] by (r+m)(r+m+1) instead of
// (r+m).  Inconsistent with E[1-p] = b'/(r+m); retained only so the two
// readings can be compared numerically.
double w_weight_alt(const SystemSpec& spec, const ObservationLedger& ledger, std::size_t i);

// B_i = E[ (sum_j sqrt(V_ij))^2 ] for one parallel group under its priors,
// expanded termwise via prior independence and half-integer beta moments.
double b_constant(const std::vector<BetaParams>& subsystem_priors);

// Limit of m * R_m for the two-stage scheme on a flat parallel system:
// E[ (sum_i sqrt(V_i))^2 ].  Same expansion as b_constant.
double asymptotic_constant_parallel(const std::vector<BetaParams>& priors);

// Limit of m * R_m for the hybrid scheme on a parallel-series system:
// E[ (sum_i sqrt(B_i Z_i))^2 ] with Z_i = prod_{l!=i} p_l^2.
double asymptotic_constant_hybrid(const SystemSpec& spec);

// All weights for a parallel-series spec and ledger in one pass.
RiskWeights risk_weights(const SystemSpec& spec, const ObservationLedger& ledger);

}  // namespace relalloc
