#pragma once

// The two-stage sampling scheme for parallel systems, the hybrid two-stage
// scheme for parallel-series systems, and the parallel/series duality
// transform.

#include <cstdint>
#include <vector>

#include "relalloc/core_model.hpp"

namespace relalloc {

// Per-subsystem and per-component sample sizes with their stage-one floors.
// Flat systems fill per_subsystem with the component sizes and leave
// per_component empty; hybrid plans fill both.
struct AllocationPlan {
    std::int64_t total = 0;            // m
    std::int64_t stage_one = 0;        // L
    std::int64_t stage_one_inner = 0;  // L tilde (hybrid only, else 0)
    std::vector<std::int64_t> per_subsystem;
    std::vector<std::vector<std::int64_t>> per_component;

    bool operator==(const AllocationPlan&) const = default;
};

// floor(sqrt(m)); the initial per-component sample size of stage one.
std::int64_t stage_one_size(std::int64_t m);

// Predictor shares total * sqrt(w_i) / sum_j sqrt(w_j); sums to total exactly
// in exact arithmetic.
std::vector<double> predictor_shares(std::int64_t total, const std::vector<double>& weights);

// Corrector: sizes[i] = max(floor_size, floor(share_i)) for i < n-1, the last
// takes the remainder, then the repair walks the last element up to the floor
// by decrementing the largest other entry (lowest index on ties).
std::vector<std::int64_t> sqrt_proportional_allocate(std::int64_t total,
                                                     const std::vector<double>& weights,
                                                     std::int64_t floor_size);

// Two-stage scheme for a flat parallel group: stage-one counts must each hold
// exactly L = floor(sqrt(m)) trials; allocation is proportional to sqrt(U_iL).
AllocationPlan two_stage_allocate(std::int64_t m, const std::vector<BetaParams>& priors,
                                  const std::vector<ComponentCounts>& stage_one_data);

// Hybrid scheme for a parallel-series system: stage-one counts hold L tilde
// trials per component; subsystems split m proportionally to sqrt(B_i w_i),
// then each subsystem splits internally like the two-stage scheme.
AllocationPlan hybrid_allocate(std::int64_t m, const SystemSpec& spec,
                               const std::vector<std::vector<ComponentCounts>>& stage_one_data);

// Equal split; the first (m mod n) entries absorb the surplus.  For grouped
// topologies the split is equal across subsystems, then equal within.
AllocationPlan fixed_equal_plan(std::int64_t m, const SystemSpec& spec);

// Caller-chosen fixed allocation, validated against the spec shape and m.
AllocationPlan fixed_custom_plan(std::int64_t m, const SystemSpec& spec,
                                 const std::vector<std::vector<std::int64_t>>& allocation);

// Swaps Parallel<->Series and ParallelSeries<->SeriesParallel, exchanging
// (alpha, beta) for every component.  An involution.
SystemSpec dualize(const SystemSpec& spec);

// The matching data transform: successes become failures.
ObservationLedger dualize(const ObservationLedger& ledger);

// Throws unless the plan satisfies its structural invariants for the spec.
void validate_plan(const AllocationPlan& plan, const SystemSpec& spec);

}  // namespace relalloc
