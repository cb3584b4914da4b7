#pragma once

// Beta-binomial conjugate machinery: priors, posterior updates, beta moments,
// and reliability point estimates for the supported system topologies.

#include <cstdint>
#include <vector>

#include "relalloc/errors.hpp"

namespace relalloc {

enum class Topology {
    Parallel,        // one group, components in parallel
    Series,          // one group, components in series
    ParallelSeries,  // groups in series, members of each group in parallel
    SeriesParallel,  // groups in parallel, members of each group in series
};

const char* topology_name(Topology t);

// Conjugate prior/posterior pair for one component's Bernoulli reliability.
// Both pseudo-counts must be strictly positive.
struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    double total() const { return alpha + beta; }
    bool operator==(const BetaParams&) const = default;
};

// Sufficient statistics of a component's test record: 0 <= successes <= trials.
struct ComponentCounts {
    std::int64_t trials = 0;
    std::int64_t successes = 0;

    std::int64_t failures() const { return trials - successes; }
    bool operator==(const ComponentCounts&) const = default;
};

// Topology plus per-component priors.  Flat Parallel/Series systems hold a
// single group; ParallelSeries/SeriesParallel hold one group per subsystem.
struct SystemSpec {
    Topology topology = Topology::Parallel;
    std::vector<std::vector<BetaParams>> groups;

    std::size_t group_count() const { return groups.size(); }
    std::size_t component_count() const;
    bool is_flat() const {
        return topology == Topology::Parallel || topology == Topology::Series;
    }
    bool operator==(const SystemSpec&) const = default;
};

// Per-component success/trial counts, with the stage-one prefix kept
// separately so the two-stage provenance of the data stays recoverable.
struct ObservationLedger {
    std::vector<std::vector<ComponentCounts>> counts;     // totals
    std::vector<std::vector<ComponentCounts>> stage_one;  // prefix observed in stage one

    bool operator==(const ObservationLedger&) const = default;
};

// Throws on violated invariants (non-positive prior mass, empty groups,
// negative or inconsistent counts, shape mismatches).
void validate(const BetaParams& prior);
void validate(const ComponentCounts& counts);
void validate(const SystemSpec& spec);
void validate(const SystemSpec& spec, const ObservationLedger& ledger);

// Conjugate update: (alpha + successes, beta + failures).
BetaParams posterior_params(const BetaParams& prior, const ComponentCounts& counts);

// log Gamma(x) and log B(a,b), safe for concurrent use.
double log_gamma(double x);
double log_beta(double a, double b);

// E[p^s (1-p)^t] under Beta(alpha, beta); s, t >= 0.  Exact product form for
// small integer exponents, log-gamma otherwise.
double beta_moment(const BetaParams& params, double s, double t);

// Low-order posterior moments used throughout the risk formulas.  Each takes
// the *posterior* parameter pair.
double mean_p(const BetaParams& post);            // E[p]
double mean_q(const BetaParams& post);            // E[1-p]
double second_moment_p(const BetaParams& post);   // E[p^2]
double second_moment_q(const BetaParams& post);   // E[(1-p)^2]
double mean_pq(const BetaParams& post);           // E[p(1-p)]

// Posterior mean and second moment of one group's reliability.
struct GroupMoments {
    double mean = 0.0;
    double second_moment = 0.0;
};
GroupMoments parallel_group_moments(const std::vector<BetaParams>& priors,
                                    const std::vector<ComponentCounts>& counts);
GroupMoments series_group_moments(const std::vector<BetaParams>& priors,
                                  const std::vector<ComponentCounts>& counts);

// Posterior-mean plug-in estimate of the system reliability.
double estimate_reliability(const SystemSpec& spec, const ObservationLedger& ledger);

// System reliability for known component values (same composition rules).
// p is shaped like spec.groups; entries must lie in (0,1).
double system_reliability(const SystemSpec& spec, const std::vector<std::vector<double>>& p);

}  // namespace relalloc
