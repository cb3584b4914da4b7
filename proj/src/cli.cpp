#include "relalloc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "relalloc/oracle.hpp"
#include "relalloc/risk.hpp"

namespace relalloc::cli {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& field, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw ConfigError("csv: field \"" + field + "\" is not a number: " + text);
    return v;
}

void expect_keys(const json& j, const char* where,
                 std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) known = true;
        if (!known)
            throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
    }
}

Topology parse_topology(const std::string& name) {
    if (name == "parallel") return Topology::Parallel;
    if (name == "series") return Topology::Series;
    if (name == "parallel-series") return Topology::ParallelSeries;
    if (name == "series-parallel") return Topology::SeriesParallel;
    throw ConfigError("system.topology: unknown topology \"" + name + "\"");
}

Scheme parse_scheme(const std::string& name) {
    if (name == "two_stage") return Scheme::TwoStage;
    if (name == "hybrid") return Scheme::Hybrid;
    if (name == "fixed_equal") return Scheme::FixedEqual;
    if (name == "fixed_custom") return Scheme::FixedCustom;
    throw ConfigError("scheme: unknown scheme \"" + name + "\"");
}

LossMode parse_loss_mode(const std::string& name) {
    if (name == "posterior_variance") return LossMode::PosteriorVariance;
    if (name == "squared_error") return LossMode::SquaredError;
    if (name == "both") return LossMode::Both;
    throw ConfigError("loss_mode: unknown loss mode \"" + name + "\"");
}

double number_field(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key))
        throw ConfigError(where + ": missing key \"" + key + "\"");
    if (!j[key].is_number())
        throw ConfigError(where + ": \"" + key + "\" must be a number");
    return j[key].get<double>();
}

SystemSpec parse_system(const json& j) {
    if (!j.is_object()) throw ConfigError("system: must be an object");
    expect_keys(j, "system", {"topology", "groups"});
    if (!j.contains("topology") || !j["topology"].is_string())
        throw ConfigError("system.topology: required string");
    if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].empty())
        throw ConfigError("system.groups: required non-empty array of groups");
    SystemSpec spec;
    spec.topology = parse_topology(j["topology"].get<std::string>());
    for (const auto& g : j["groups"]) {
        if (!g.is_array() || g.empty())
            throw ConfigError("system.groups: every group must be a non-empty array");
        std::vector<BetaParams> group;
        for (const auto& c : g) {
            if (!c.is_object()) throw ConfigError("system.groups: components must be objects");
            expect_keys(c, "system.groups component", {"alpha", "beta"});
            group.push_back({number_field(c, "component", "alpha"),
                             number_field(c, "component", "beta")});
        }
        spec.groups.push_back(std::move(group));
    }
    validate(spec);
    return spec;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
}

json parse_json_text(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    const json j = parse_json_text(text, "config");
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    expect_keys(j, "config",
                {"system", "scheme", "m_grid", "replications", "master_seed", "loss_mode",
                 "output_path", "allocation", "p_true", "mc_draws", "max_paths"});
    if (!j.contains("system")) throw ConfigError("config: missing key \"system\"");
    ExperimentConfig cfg;
    cfg.sim.system = parse_system(j["system"]);

    if (j.contains("scheme")) {
        if (!j["scheme"].is_string()) throw ConfigError("scheme: must be a string");
        cfg.sim.scheme = parse_scheme(j["scheme"].get<std::string>());
    } else {
        cfg.sim.scheme = cfg.sim.system.is_flat() ? Scheme::TwoStage : Scheme::Hybrid;
    }

    if (!j.contains("m_grid") || !j["m_grid"].is_array() || j["m_grid"].empty())
        throw ConfigError("m_grid: required non-empty array of integers");
    for (const auto& v : j["m_grid"]) {
        if (!v.is_number_integer())
            throw ConfigError("m_grid: entries must be integers");
        cfg.sim.m_grid.push_back(v.get<std::int64_t>());
    }

    if (j.contains("replications")) {
        if (!j["replications"].is_number_integer() || j["replications"].get<std::int64_t>() < 1)
            throw ConfigError("replications: must be a positive integer");
        cfg.sim.replications = j["replications"].get<std::int64_t>();
    }
    if (j.contains("master_seed")) {
        if (!j["master_seed"].is_number_integer())
            throw ConfigError("master_seed: must be an integer");
        cfg.sim.master_seed = j["master_seed"].get<std::uint64_t>();
    }
    if (j.contains("loss_mode")) {
        if (!j["loss_mode"].is_string()) throw ConfigError("loss_mode: must be a string");
        cfg.sim.loss_mode = parse_loss_mode(j["loss_mode"].get<std::string>());
    }
    if (j.contains("output_path")) {
        if (!j["output_path"].is_string()) throw ConfigError("output_path: must be a string");
        cfg.output_path = j["output_path"].get<std::string>();
    }
    if (j.contains("allocation")) {
        if (!j["allocation"].is_array())
            throw ConfigError("allocation: must be an array of integer arrays");
        for (const auto& g : j["allocation"]) {
            if (!g.is_array()) throw ConfigError("allocation: must be an array of integer arrays");
            std::vector<std::int64_t> group;
            for (const auto& v : g) {
                if (!v.is_number_integer())
                    throw ConfigError("allocation: entries must be integers");
                group.push_back(v.get<std::int64_t>());
            }
            cfg.sim.custom_allocation.push_back(std::move(group));
        }
    }
    if (j.contains("p_true")) {
        if (!j["p_true"].is_array()) throw ConfigError("p_true: must be an array of arrays");
        for (const auto& g : j["p_true"]) {
            if (!g.is_array()) throw ConfigError("p_true: must be an array of arrays");
            std::vector<double> group;
            for (const auto& v : g) {
                if (!v.is_number()) throw ConfigError("p_true: entries must be numbers");
                group.push_back(v.get<double>());
            }
            cfg.p_true.push_back(std::move(group));
        }
    }
    if (j.contains("mc_draws")) {
        if (!j["mc_draws"].is_number_integer() || j["mc_draws"].get<std::int64_t>() < 2)
            throw ConfigError("mc_draws: must be an integer of at least 2");
        cfg.mc_draws = j["mc_draws"].get<std::int64_t>();
    }
    if (j.contains("max_paths")) {
        if (!j["max_paths"].is_number_integer() || j["max_paths"].get<std::int64_t>() < 1)
            throw ConfigError("max_paths: must be a positive integer");
        cfg.max_paths = j["max_paths"].get<std::int64_t>();
    }

    validate(cfg.sim);
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    return parse_config_text(read_file(path));
}

std::vector<std::vector<ComponentCounts>> parse_stage_one_data(const std::string& path) {
    const json j = parse_json_text(read_file(path), "stage-one data");
    if (!j.is_object()) throw ConfigError("stage-one data: top level must be an object");
    expect_keys(j, "stage-one data", {"groups"});
    if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].empty())
        throw ConfigError("stage-one data: missing \"groups\" array");
    std::vector<std::vector<ComponentCounts>> out;
    for (const auto& g : j["groups"]) {
        if (!g.is_array()) throw ConfigError("stage-one data: groups must be arrays");
        std::vector<ComponentCounts> group;
        for (const auto& c : g) {
            if (!c.is_object())
                throw ConfigError("stage-one data: counts must be objects");
            expect_keys(c, "stage-one data counts", {"trials", "successes"});
            if (!c.contains("trials") || !c.contains("successes") ||
                !c["trials"].is_number_integer() || !c["successes"].is_number_integer())
                throw ConfigError("stage-one data: counts need integer trials and successes");
            ComponentCounts counts{c["trials"].get<std::int64_t>(),
                                   c["successes"].get<std::int64_t>()};
            validate(counts);
            group.push_back(counts);
        }
        out.push_back(std::move(group));
    }
    return out;
}

std::string plan_to_json(const AllocationPlan& plan) {
    ordered_json j;
    j["m"] = plan.total;
    j["L"] = plan.stage_one;
    if (!plan.per_component.empty()) j["L_tilde"] = plan.stage_one_inner;
    j["m_i"] = plan.per_subsystem;
    if (!plan.per_component.empty()) j["m_ij"] = plan.per_component;
    return j.dump();
}

AllocationPlan plan_from_json(const std::string& text) {
    const json j = parse_json_text(text, "plan");
    expect_keys(j, "plan", {"m", "L", "L_tilde", "m_i", "m_ij"});
    AllocationPlan plan;
    plan.total = j.at("m").get<std::int64_t>();
    plan.stage_one = j.at("L").get<std::int64_t>();
    if (j.contains("L_tilde")) plan.stage_one_inner = j["L_tilde"].get<std::int64_t>();
    plan.per_subsystem = j.at("m_i").get<std::vector<std::int64_t>>();
    if (j.contains("m_ij"))
        plan.per_component = j["m_ij"].get<std::vector<std::vector<std::int64_t>>>();
    return plan;
}

std::string plan_table(const AllocationPlan& plan) {
    std::ostringstream out;
    out << "total m      " << plan.total << "\n";
    out << "stage one L  " << plan.stage_one << "\n";
    if (!plan.per_component.empty())
        out << "inner L~     " << plan.stage_one_inner << "\n";
    const char* label = plan.per_component.empty() ? "component" : "subsystem";
    for (std::size_t i = 0; i < plan.per_subsystem.size(); ++i) {
        out << label << " " << (i + 1) << "  m_i=" << plan.per_subsystem[i];
        if (!plan.per_component.empty()) {
            out << "  m_ij=[";
            for (std::size_t jx = 0; jx < plan.per_component[i].size(); ++jx) {
                if (jx) out << ", ";
                out << plan.per_component[i][jx];
            }
            out << "]";
        }
        out << "\n";
    }
    return out.str();
}

std::string report_to_csv(const RiskReport& report) {
    std::ostringstream out;
    out << "m,scheme,risk_estimate,std_error,m_times_risk,target_constant,replications,seed\n";
    for (const auto& row : report) {
        out << row.m << ',' << scheme_name(row.scheme) << ',' << fmt17(row.risk_estimate)
            << ',' << fmt17(row.std_error) << ',' << fmt17(row.m_times_risk) << ','
            << fmt17(row.target_constant) << ',' << row.replications << ',' << row.seed
            << '\n';
    }
    return out.str();
}

RiskReport report_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "m,scheme,risk_estimate,std_error,m_times_risk,target_constant,replications,seed")
        throw ConfigError("csv: unexpected header");
    RiskReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 8) throw ConfigError("csv: expected 8 fields per row");
        RiskRow row;
        row.m = std::stoll(fields[0]);
        row.scheme = parse_scheme(fields[1]);
        row.risk_estimate = parse_double("risk_estimate", fields[2]);
        row.std_error = parse_double("std_error", fields[3]);
        row.m_times_risk = parse_double("m_times_risk", fields[4]);
        row.target_constant = parse_double("target_constant", fields[5]);
        row.replications = std::stoll(fields[6]);
        row.seed = std::stoull(fields[7]);
        row.alt_risk_estimate = std::numeric_limits<double>::quiet_NaN();
        row.alt_std_error = std::numeric_limits<double>::quiet_NaN();
        report.push_back(row);
    }
    return report;
}

std::string row_to_json(const RiskRow& row) {
    ordered_json j;
    j["m"] = row.m;
    j["scheme"] = scheme_name(row.scheme);
    j["risk_estimate"] = row.risk_estimate;
    j["std_error"] = std::isnan(row.std_error) ? json() : json(row.std_error);
    j["m_times_risk"] = row.m_times_risk;
    j["target_constant"] = row.target_constant;
    j["replications"] = row.replications;
    j["seed"] = row.seed;
    if (!std::isnan(row.alt_risk_estimate)) {
        j["squared_error_estimate"] = row.alt_risk_estimate;
        j["squared_error_std_error"] = row.alt_std_error;
    }
    return j.dump();
}

namespace {

int env_threads() {
    if (const char* env = std::getenv("RELALLOC_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return 0;
}

ExperimentConfig load(const CommandOptions& options) {
    if (options.config_path.empty()) throw ConfigError("--config is required");
    ExperimentConfig cfg = parse_config(options.config_path);
    if (options.seed) cfg.sim.master_seed = *options.seed;
    cfg.sim.threads = options.threads ? *options.threads : env_threads();
    return cfg;
}

std::int64_t pick_m(const CommandOptions& options, const ExperimentConfig& cfg) {
    return options.m ? *options.m : cfg.sim.m_grid.front();
}

void deliver(const CommandOptions& options, const std::string& fallback_path,
             const std::string& content, std::ostream& out) {
    const std::string& path = !options.out_path.empty() ? options.out_path : fallback_path;
    if (!path.empty())
        write_file(path, content);
    else
        out << content;
}

// Closed-form constants against their prior-sampling estimates.
ordered_json constants_report(const ExperimentConfig& cfg, bool& any_fail) {
    ordered_json items = ordered_json::array();
    const SystemSpec& spec = cfg.sim.system;
    SystemSpec canonical = spec;
    if (spec.topology == Topology::Series || spec.topology == Topology::SeriesParallel)
        canonical = dualize(spec);
    auto add = [&](const std::string& name, double closed, const McEstimate& mc) {
        const double z = std::abs(closed - mc.mean) / mc.std_error;
        ordered_json item;
        item["name"] = name;
        item["closed_form"] = closed;
        item["mc"] = mc.mean;
        item["std_error"] = mc.std_error;
        item["z_score"] = z;
        item["draws"] = mc.draws;
        item["status"] = z <= 3.0 ? "pass" : "fail";
        if (z > 3.0) any_fail = true;
        items.push_back(item);
    };
    if (canonical.topology == Topology::Parallel) {
        add("two_stage_limit", asymptotic_constant_parallel(canonical.groups[0]),
            mc_constant_parallel(canonical.groups[0], cfg.mc_draws, cfg.sim.master_seed,
                                 cfg.sim.threads));
    } else {
        add("hybrid_limit", asymptotic_constant_hybrid(canonical),
            mc_constant_hybrid(canonical, cfg.mc_draws, cfg.sim.master_seed, cfg.sim.threads));
        for (std::size_t i = 0; i < canonical.groups.size(); ++i)
            add("b_constant_" + std::to_string(i + 1), b_constant(canonical.groups[i]),
                mc_constant_parallel(canonical.groups[i], cfg.mc_draws,
                                     cfg.sim.master_seed + i + 1, cfg.sim.threads));
    }
    return items;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int cmd_allocate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const ExperimentConfig cfg = load(options);
        const std::int64_t m = pick_m(options, cfg);
        const SystemSpec& spec = cfg.sim.system;
        AllocationPlan plan;
        switch (cfg.sim.scheme) {
            case Scheme::TwoStage: {
                if (options.data_path.empty())
                    throw ConfigError("a stage-one data file is required for the two-stage scheme");
                auto data = parse_stage_one_data(options.data_path);
                ObservationLedger probe{data, data};
                validate(spec, probe);  // shape check against the configured system
                std::vector<BetaParams> priors = spec.groups[0];
                std::vector<ComponentCounts> counts = data[0];
                if (spec.topology == Topology::Series) {
                    priors = dualize(spec).groups[0];
                    for (auto& c : counts) c.successes = c.failures();
                }
                plan = two_stage_allocate(m, priors, counts);
                break;
            }
            case Scheme::Hybrid: {
                if (options.data_path.empty())
                    throw ConfigError("a stage-one data file is required for the hybrid scheme");
                auto data = parse_stage_one_data(options.data_path);
                ObservationLedger probe{data, data};
                validate(spec, probe);
                SystemSpec target = spec;
                if (spec.topology == Topology::SeriesParallel) {
                    target = dualize(spec);
                    for (auto& g : data)
                        for (auto& c : g) c.successes = c.failures();
                }
                plan = hybrid_allocate(m, target, data);
                break;
            }
            case Scheme::FixedEqual:
                plan = fixed_equal_plan(m, spec);
                break;
            case Scheme::FixedCustom:
                plan = fixed_custom_plan(m, spec, cfg.sim.custom_allocation);
                break;
        }
        const std::string payload = plan_to_json(plan) + "\n";
        out << payload << plan_table(plan);
        if (!options.out_path.empty()) write_file(options.out_path, payload);
        return 0;
    });
}

int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const ExperimentConfig cfg = load(options);
        const RiskRow row = estimate_bayes_risk(cfg.sim, pick_m(options, cfg));
        deliver(options, cfg.output_path, row_to_json(row) + "\n", out);
        return 0;
    });
}

int cmd_converge(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const ExperimentConfig cfg = load(options);
        const RiskReport report = convergence_study(cfg.sim);
        deliver(options, cfg.output_path, report_to_csv(report), out);
        return 0;
    });
}

int cmd_fractions(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const ExperimentConfig cfg = load(options);
        if (cfg.p_true.empty())
            throw ConfigError("p_true: required in the config for the fractions command");
        const std::int64_t m = pick_m(options, cfg);
        const FractionStudy study = fraction_study(cfg.sim, m, cfg.p_true);
        ordered_json j;
        j["m"] = m;
        j["scheme"] = scheme_name(cfg.sim.scheme);
        j["realized"] = study.realized;
        j["target"] = study.target;
        double worst = 0.0;
        for (std::size_t i = 0; i < study.realized.size(); ++i)
            worst = std::max(worst, std::abs(study.realized[i] - study.target[i]));
        j["max_abs_error"] = worst;
        deliver(options, cfg.output_path, j.dump(2) + "\n", out);
        return 0;
    });
}

int cmd_oracle(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const ExperimentConfig cfg = load(options);
        const EnumerationBudget budget{cfg.max_paths};
        bool any_fail = false;
        ordered_json j;
        j["exact_risks"] = ordered_json::array();
        for (std::int64_t m : cfg.sim.m_grid) {
            ordered_json item;
            item["m"] = m;
            item["scheme"] = scheme_name(cfg.sim.scheme);
            try {
                const ExactRiskResult r = exact_scheme_risk(
                    cfg.sim.system, cfg.sim.scheme, m, budget,
                    cfg.sim.custom_allocation.empty() ? nullptr : &cfg.sim.custom_allocation);
                item["exact_risk"] = r.risk;
                item["m_times_risk"] = static_cast<double>(m) * r.risk;
                item["probability_mass"] = r.probability_mass;
                item["paths"] = r.paths;
            } catch (const BudgetExceededError&) {
                item["status"] = "budget_exceeded";
                any_fail = true;
            }
            j["exact_risks"].push_back(item);
        }
        j["optimal_fixed"] = ordered_json::array();
        for (std::int64_t m : cfg.sim.m_grid) {
            ordered_json item;
            item["m"] = m;
            try {
                const OptimalFixedResult r = optimal_fixed_allocation(cfg.sim.system, m, budget);
                item["allocation"] = r.allocation;
                item["exact_risk"] = r.risk;
            } catch (const BudgetExceededError&) {
                item["status"] = "budget_exceeded";
                any_fail = true;
            }
            j["optimal_fixed"].push_back(item);
        }
        j["constants"] = constants_report(cfg, any_fail);
        j["status"] = any_fail ? "fail" : "pass";
        deliver(options, cfg.output_path, j.dump(2) + "\n", out);
        return any_fail ? 1 : 0;
    });
}

int cmd_constants(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const ExperimentConfig cfg = load(options);
        bool any_fail = false;
        ordered_json j;
        j["constants"] = constants_report(cfg, any_fail);
        j["status"] = any_fail ? "fail" : "pass";
        deliver(options, cfg.output_path, j.dump(2) + "\n", out);
        return any_fail ? 1 : 0;
    });
}

}  // namespace relalloc::cli
