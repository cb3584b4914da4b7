#pragma once

// Seeded Monte Carlo estimation of the Bayes risk of a sampling scheme, with
// convergence studies against the closed-form limits and allocation-fraction
// studies against their almost-sure targets.

#include <cstdint>
#include <string>
#include <vector>

#include "relalloc/allocation.hpp"
#include "relalloc/core_model.hpp"

namespace relalloc {

enum class Scheme { TwoStage, Hybrid, FixedEqual, FixedCustom };
enum class LossMode { PosteriorVariance, SquaredError, Both };

const char* scheme_name(Scheme s);
const char* loss_mode_name(LossMode m);

struct SimulationConfig {
    SystemSpec system;
    Scheme scheme = Scheme::TwoStage;
    std::vector<std::int64_t> m_grid;
    std::int64_t replications = 10000;
    std::uint64_t master_seed = 0;
    LossMode loss_mode = LossMode::PosteriorVariance;
    std::vector<std::vector<std::int64_t>> custom_allocation;  // FixedCustom only
    int threads = 0;                                           // 0 => hardware count
};

// Both losses are unbiased for the Bayes risk; the posterior variance is the
// Rao-Blackwellized one and carries far less Monte Carlo noise.
struct ReplicationRecord {
    double posterior_variance = 0.0;
    double squared_error = 0.0;
};

struct RiskRow {
    std::int64_t m = 0;
    Scheme scheme = Scheme::TwoStage;
    double risk_estimate = 0.0;  // mean of the primary loss
    double std_error = 0.0;      // NaN when replications == 1
    double m_times_risk = 0.0;
    double target_constant = 0.0;
    std::int64_t replications = 0;
    std::uint64_t seed = 0;
    // Secondary loss (squared error) when loss_mode == Both, else NaN.
    double alt_risk_estimate = 0.0;
    double alt_std_error = 0.0;
};

using RiskReport = std::vector<RiskRow>;

struct FractionStudy {
    std::vector<double> realized;  // m_i / m, subsystem level (component level when flat)
    std::vector<double> target;    // sqrt(V_i)/sum or sqrt(B_i Z_i)/sum at the true p
    AllocationPlan plan;
};

// Validates scheme/topology compatibility and per-m feasibility; throws.
void validate(const SimulationConfig& config);
void check_feasible(const SimulationConfig& config, std::int64_t m);

// One replication: draw the true p from the prior, generate the staged data,
// run the scheme, and score both losses.  Deterministic in
// (master_seed, replication_index).
ReplicationRecord run_replication(const SimulationConfig& config, std::int64_t m,
                                  std::int64_t replication_index);

// Mean loss over replications accumulated in index order with compensated
// summation, so the result is independent of the thread count.
RiskRow estimate_bayes_risk(const SimulationConfig& config, std::int64_t m);

// One row per entry of m_grid.
RiskReport convergence_study(const SimulationConfig& config);

// Generates a single data path from a fixed true p (shaped like the system
// groups) and compares the realized allocation fractions to their limits.
FractionStudy fraction_study(const SimulationConfig& config, std::int64_t m,
                             const std::vector<std::vector<double>>& p_true);

// Benchmark constant for the config's topology: the two-stage limit for flat
// systems, the hybrid limit for grouped ones (dual systems use their dual).
double target_constant(const SystemSpec& spec);

}  // namespace relalloc
