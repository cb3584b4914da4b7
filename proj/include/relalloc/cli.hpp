#pragma once

// Configuration ingestion, experiment orchestration and machine-readable
// result emission.  The executable in tools/ is a thin argv wrapper around
// these functions so every behavior stays testable in-process.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "relalloc/allocation.hpp"
#include "relalloc/simulation.hpp"

namespace relalloc::cli {

struct ExperimentConfig {
    SimulationConfig sim;
    std::vector<std::vector<double>> p_true;  // empty unless configured
    std::string output_path;
    std::int64_t mc_draws = 1'000'000;
    std::int64_t max_paths = 10'000'000;
};

// Strict JSON parsing: unknown keys and invariant violations are rejected
// with a message naming the offending field.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

// Stage-one data file: {"groups": [[{"trials": t, "successes": s}, ...], ...]}.
std::vector<std::vector<ComponentCounts>> parse_stage_one_data(const std::string& path);

// Plan serialization: {"m":..,"L":..,"m_i":[..]} plus "L_tilde"/"m_ij" for
// hybrid plans.  parse(emit(x)) == x.
std::string plan_to_json(const AllocationPlan& plan);
AllocationPlan plan_from_json(const std::string& text);
std::string plan_table(const AllocationPlan& plan);

// CSV with a fixed header and 17-significant-digit floats; byte-stable for a
// given seed and independent of the thread count.  parse(emit(x)) == x.
std::string report_to_csv(const RiskReport& report);
RiskReport report_from_csv(const std::string& text);

std::string row_to_json(const RiskRow& row);

struct CommandOptions {
    std::string config_path;
    std::string data_path;                 // allocate
    std::string out_path;                  // --out
    std::optional<std::uint64_t> seed;     // --seed
    std::optional<int> threads;            // --threads (RELALLOC_THREADS fallback)
    std::optional<std::int64_t> m;         // --m
};

// Subcommand drivers; each returns the process exit code.
int cmd_allocate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_converge(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_fractions(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_oracle(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_constants(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace relalloc::cli
