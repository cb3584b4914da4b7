#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "relalloc/cli.hpp"

using namespace relalloc;
namespace cli = relalloc::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("relalloc_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p.string();
    }
    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

const char* kPairConfig = R"({
  "system": {"topology": "parallel", "groups": [[{"alpha": 1, "beta": 1}, {"alpha": 1, "beta": 1}]]},
  "scheme": "two_stage",
  "m_grid": [100, 400],
  "replications": 400,
  "master_seed": 7
})";

}  // namespace

TEST_CASE("minimal config gets defaults") {
    const auto cfg = cli::parse_config_text(
        R"({"system": {"topology": "parallel", "groups": [[{"alpha": 1, "beta": 1}]]},
            "m_grid": [100]})");
    CHECK(cfg.sim.scheme == Scheme::TwoStage);
    CHECK(cfg.sim.loss_mode == LossMode::PosteriorVariance);
    CHECK(cfg.sim.replications == 10000);
    CHECK(cfg.sim.master_seed == 0);
    CHECK(cfg.sim.m_grid == std::vector<std::int64_t>{100});
}

TEST_CASE("grouped systems default to the hybrid scheme") {
    const auto cfg = cli::parse_config_text(
        R"({"system": {"topology": "parallel-series",
                       "groups": [[{"alpha": 1, "beta": 1}], [{"alpha": 1, "beta": 1}]]},
            "m_grid": [100]})");
    CHECK(cfg.sim.scheme == Scheme::Hybrid);
}

TEST_CASE("a one-group parallel-series spec is valid") {
    const auto cfg = cli::parse_config_text(
        R"({"system": {"topology": "parallel-series",
                       "groups": [[{"alpha": 1, "beta": 1}, {"alpha": 2, "beta": 3}]]},
            "m_grid": [100]})");
    CHECK(cfg.sim.system.groups.size() == 1);
    CHECK(cfg.sim.system.groups[0].size() == 2);
}

TEST_CASE("config rejections name the offending field") {
    CHECK_THROWS_WITH_AS(
        cli::parse_config_text(
            R"({"system": {"topology": "parallel", "groups": [[{"alpha": 0, "beta": 1}]]},
                "m_grid": [100]})"),
        "alpha must be a positive finite real", ConfigError);
    CHECK_THROWS_WITH_AS(
        cli::parse_config_text(
            R"({"system": {"topology": "parallel", "groups": [[{"alpha": 1, "beta": 1}]]},
                "m_grid": [100], "frobnicate": 1})"),
        "config: unknown key \"frobnicate\"", ConfigError);
    CHECK_THROWS_AS(cli::parse_config_text("{"), ConfigError);
    CHECK_THROWS_AS(cli::parse_config_text(
                        R"({"system": {"topology": "parallel",
                                       "groups": [[{"alpha": 1, "beta": 1}]]}})"),
                    ConfigError);
}

TEST_CASE("custom allocations that do not sum to m are rejected at parse time") {
    CHECK_THROWS_WITH_AS(
        cli::parse_config_text(
            R"({"system": {"topology": "parallel",
                           "groups": [[{"alpha": 1, "beta": 1}, {"alpha": 1, "beta": 1}]]},
                "scheme": "fixed_custom", "m_grid": [100], "allocation": [[60, 41]]})"),
        "custom allocation must sum to m", ConfigError);
}

TEST_CASE("plan serialization round-trips") {
    AllocationPlan plan;
    plan.total = 100;
    plan.stage_one = 10;
    plan.per_subsystem = {50, 50};
    CHECK(cli::plan_to_json(plan) == R"({"m":100,"L":10,"m_i":[50,50]})");
    CHECK(cli::plan_from_json(cli::plan_to_json(plan)) == plan);

    AllocationPlan hybrid;
    hybrid.total = 100;
    hybrid.stage_one = 10;
    hybrid.stage_one_inner = 3;
    hybrid.per_subsystem = {24, 76};
    hybrid.per_component = {{24}, {76}};
    CHECK(cli::plan_from_json(cli::plan_to_json(hybrid)) == hybrid);
}

TEST_CASE("allocate command emits plan JSON and a table") {
    TempDir dir;
    const std::string config = dir.file("config.json", kPairConfig);
    const std::string data = dir.file(
        "stage1.json",
        R"({"groups": [[{"trials": 10, "successes": 5}, {"trials": 10, "successes": 5}]]})");
    cli::CommandOptions options;
    options.config_path = config;
    options.data_path = data;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_allocate(options, out, err) == 0);
    CHECK(out.str().find(R"({"m":100,"L":10,"m_i":[50,50]})") != std::string::npos);
    CHECK(out.str().find("total m") != std::string::npos);
}

TEST_CASE("allocate command reflects lopsided stage-one data") {
    TempDir dir;
    const std::string config = dir.file("config.json", kPairConfig);
    const std::string data = dir.file(
        "stage1.json",
        R"({"groups": [[{"trials": 10, "successes": 0}, {"trials": 10, "successes": 10}]]})");
    cli::CommandOptions options;
    options.config_path = config;
    options.data_path = data;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_allocate(options, out, err) == 0);
    CHECK(out.str().find(R"("m_i":[10,90])") != std::string::npos);
}

TEST_CASE("allocate without a stage-one file fails cleanly") {
    TempDir dir;
    const std::string config = dir.file("config.json", kPairConfig);
    cli::CommandOptions options;
    options.config_path = config;
    std::ostringstream out, err;
    CHECK(cli::cmd_allocate(options, out, err) == 1);
    CHECK(err.str().find("stage-one data file") != std::string::npos);

    options.data_path = (dir.path / "missing.json").string();
    std::ostringstream out2, err2;
    CHECK(cli::cmd_allocate(options, out2, err2) == 1);
    CHECK(err2.str().find("cannot open file") != std::string::npos);
}

TEST_CASE("converge emits a deterministic CSV") {
    TempDir dir;
    const std::string config = dir.file("config.json", kPairConfig);
    cli::CommandOptions options;
    options.config_path = config;
    options.out_path = (dir.path / "a.csv").string();
    std::ostringstream out, err;
    REQUIRE(cli::cmd_converge(options, out, err) == 0);
    const std::string first = TempDir::slurp(options.out_path);

    options.out_path = (dir.path / "b.csv").string();
    options.threads = 4;
    REQUIRE(cli::cmd_converge(options, out, err) == 0);
    const std::string second = TempDir::slurp(options.out_path);
    CHECK(first == second);

    std::istringstream lines(first);
    std::string header;
    std::getline(lines, header);
    CHECK(header ==
          "m,scheme,risk_estimate,std_error,m_times_risk,target_constant,replications,seed");
    int rows = 0;
    for (std::string line; std::getline(lines, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    const RiskReport parsed = cli::report_from_csv(first);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].target_constant ==
          doctest::Approx(1.0 / 9.0 + 9.869604401089358 / 128.0).epsilon(1e-12));
    CHECK(parsed[0].m == 100);
    CHECK(parsed[1].m == 400);

    // parse(emit(x)) round-trips to the same bytes
    CHECK(cli::report_to_csv(parsed) == first);
}

TEST_CASE("simulate reports a null standard error for one replication") {
    TempDir dir;
    const std::string config = dir.file("config.json", R"({
        "system": {"topology": "parallel", "groups": [[{"alpha": 1, "beta": 1}]]},
        "m_grid": [100], "replications": 1})");
    cli::CommandOptions options;
    options.config_path = config;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_simulate(options, out, err) == 0);
    CHECK(out.str().find("\"std_error\":null") != std::string::npos);
}

TEST_CASE("oracle command reports the exact small-system risk") {
    TempDir dir;
    const std::string config = dir.file("config.json", R"({
        "system": {"topology": "parallel", "groups": [[{"alpha": 1, "beta": 1}]]},
        "scheme": "fixed_equal", "m_grid": [2], "mc_draws": 50000})");
    cli::CommandOptions options;
    options.config_path = config;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_oracle(options, out, err) == 0);
    CHECK(out.str().find("0.041666666666666") != std::string::npos);
    CHECK(out.str().find("\"status\": \"pass\"") != std::string::npos);
}

TEST_CASE("oracle command reports budget exhaustion per item and keeps going") {
    TempDir dir;
    const std::string config = dir.file("config.json", R"({
        "system": {"topology": "parallel",
                   "groups": [[{"alpha": 1, "beta": 1}, {"alpha": 1, "beta": 1}]]},
        "scheme": "two_stage", "m_grid": [64], "mc_draws": 50000, "max_paths": 1000})");
    cli::CommandOptions options;
    options.config_path = config;
    std::ostringstream out, err;
    CHECK(cli::cmd_oracle(options, out, err) == 1);
    CHECK(out.str().find("budget_exceeded") != std::string::npos);
    CHECK(out.str().find("\"constants\"") != std::string::npos);
}

TEST_CASE("constants command checks closed forms against sampling") {
    TempDir dir;
    const std::string config = dir.file("config.json", R"({
        "system": {"topology": "parallel",
                   "groups": [[{"alpha": 2, "beta": 1}, {"alpha": 1, "beta": 3}]]},
        "m_grid": [100], "mc_draws": 200000, "master_seed": 12})");
    cli::CommandOptions options;
    options.config_path = config;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_constants(options, out, err) == 0);
    CHECK(out.str().find("two_stage_limit") != std::string::npos);
    CHECK(out.str().find("\"status\": \"pass\"") != std::string::npos);
}

TEST_CASE("fractions command needs p_true") {
    TempDir dir;
    const std::string config = dir.file("config.json", kPairConfig);
    cli::CommandOptions options;
    options.config_path = config;
    std::ostringstream out, err;
    CHECK(cli::cmd_fractions(options, out, err) == 1);
    CHECK(err.str().find("p_true") != std::string::npos);

    const std::string with_p = dir.file("config2.json", R"({
        "system": {"topology": "parallel",
                   "groups": [[{"alpha": 1, "beta": 1}, {"alpha": 1, "beta": 1}]]},
        "m_grid": [10000], "p_true": [[0.2, 0.8]]})");
    options.config_path = with_p;
    std::ostringstream out2, err2;
    REQUIRE(cli::cmd_fractions(options, out2, err2) == 0);
    CHECK(out2.str().find("\"realized\"") != std::string::npos);
}
