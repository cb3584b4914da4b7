#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relalloc/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Bayesian sequential sample allocation for system reliability estimation"};
    app.require_subcommand(1);

    relalloc::cli::CommandOptions options;
    std::uint64_t seed = 0;
    int threads = 0;
    std::int64_t m = 0;

    auto add_common = [&](CLI::App* cmd, bool with_m) {
        cmd->add_option("--config", options.config_path, "experiment configuration (JSON)")
            ->required();
        cmd->add_option("--out", options.out_path, "write the result to this path");
        cmd->add_option("--seed", seed, "override the config's master seed");
        cmd->add_option("--threads", threads, "worker threads (output bytes are unaffected)");
        if (with_m)
            cmd->add_option("--m", m, "total sample size (default: first m_grid entry)");
    };

    CLI::App* allocate = app.add_subcommand("allocate", "compute an allocation plan");
    add_common(allocate, true);
    allocate->add_option("--data", options.data_path, "stage-one data file (JSON)");

    CLI::App* simulate = app.add_subcommand("simulate", "estimate the Bayes risk at one m");
    add_common(simulate, true);

    CLI::App* converge = app.add_subcommand("converge", "risk convergence study over m_grid (CSV)");
    add_common(converge, false);

    CLI::App* fractions = app.add_subcommand("fractions", "allocation fractions vs. their limits");
    add_common(fractions, true);

    CLI::App* oracle = app.add_subcommand("oracle", "exact enumeration and constant cross-checks");
    add_common(oracle, false);

    CLI::App* constants = app.add_subcommand("constants", "closed-form constants vs. Monte Carlo");
    add_common(constants, false);

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    auto flag_given = [&](const char* name) {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (flag_given("--seed")) options.seed = seed;
    if (flag_given("--threads")) options.threads = threads;
    if (flag_given("--m")) options.m = m;

    if (sub == allocate) return relalloc::cli::cmd_allocate(options, std::cout, std::cerr);
    if (sub == simulate) return relalloc::cli::cmd_simulate(options, std::cout, std::cerr);
    if (sub == converge) return relalloc::cli::cmd_converge(options, std::cout, std::cerr);
    if (sub == fractions) return relalloc::cli::cmd_fractions(options, std::cout, std::cerr);
    if (sub == oracle) return relalloc::cli::cmd_oracle(options, std::cout, std::cerr);
    if (sub == constants) return relalloc::cli::cmd_constants(options, std::cout, std::cerr);
    return 1;
}
