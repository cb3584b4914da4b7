#include "relalloc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "relalloc/risk.hpp"
#include "relalloc/rng.hpp"

namespace relalloc {

namespace {

constexpr std::uint64_t kReplicationSalt = 1;
constexpr std::uint64_t kFractionSalt = 2;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Simulation always runs in the canonical orientation (Parallel or
// ParallelSeries); dual topologies are mapped onto it by swapping the roles
// of successes and failures, which leaves both losses unchanged.
struct Context {
    SystemSpec spec;       // canonical
    bool dualized = false;
    Scheme scheme = Scheme::TwoStage;
    const SimulationConfig* config = nullptr;
};

Context make_context(const SimulationConfig& config) {
    Context ctx;
    ctx.config = &config;
    ctx.scheme = config.scheme;
    if (config.system.topology == Topology::Series ||
        config.system.topology == Topology::SeriesParallel) {
        ctx.spec = dualize(config.system);
        ctx.dualized = true;
    } else {
        ctx.spec = config.system;
    }
    return ctx;
}

AllocationPlan fixed_plan(const Context& ctx, std::int64_t m) {
    if (ctx.scheme == Scheme::FixedEqual) return fixed_equal_plan(m, ctx.spec);
    return fixed_custom_plan(m, ctx.spec, ctx.config->custom_allocation);
}

// Draw order is pinned: true p per component, stage-one counts, stage-two
// counts, always in group-major order.
ReplicationRecord replicate(const Context& ctx, std::int64_t m, SplitMix64 rng) {
    const SystemSpec& spec = ctx.spec;
    std::vector<std::vector<double>> p(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        p[i].resize(spec.groups[i].size());
        for (std::size_t j = 0; j < spec.groups[i].size(); ++j)
            p[i][j] = rand_beta(rng, spec.groups[i][j]);
    }

    ObservationLedger ledger;
    ledger.counts.resize(spec.groups.size());
    ledger.stage_one.resize(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        ledger.counts[i].resize(spec.groups[i].size());
        ledger.stage_one[i].resize(spec.groups[i].size());
    }

    AllocationPlan plan;
    switch (ctx.scheme) {
        case Scheme::TwoStage: {
            const std::int64_t l = stage_one_size(m);
            auto& counts = ledger.counts[0];
            auto& first = ledger.stage_one[0];
            for (std::size_t j = 0; j < spec.groups[0].size(); ++j)
                first[j] = {l, rand_binomial(rng, l, p[0][j])};
            plan = two_stage_allocate(m, spec.groups[0], first);
            for (std::size_t j = 0; j < spec.groups[0].size(); ++j) {
                const std::int64_t extra = plan.per_subsystem[j] - l;
                counts[j] = {plan.per_subsystem[j],
                             first[j].successes + rand_binomial(rng, extra, p[0][j])};
            }
            break;
        }
        case Scheme::Hybrid: {
            const std::int64_t lt = stage_one_size(stage_one_size(m));
            for (std::size_t i = 0; i < spec.groups.size(); ++i)
                for (std::size_t j = 0; j < spec.groups[i].size(); ++j)
                    ledger.stage_one[i][j] = {lt, rand_binomial(rng, lt, p[i][j])};
            plan = hybrid_allocate(m, spec, ledger.stage_one);
            for (std::size_t i = 0; i < spec.groups.size(); ++i) {
                for (std::size_t j = 0; j < spec.groups[i].size(); ++j) {
                    const std::int64_t total = plan.per_component[i][j];
                    ledger.counts[i][j] = {
                        total, ledger.stage_one[i][j].successes +
                                   rand_binomial(rng, total - lt, p[i][j])};
                }
            }
            break;
        }
        case Scheme::FixedEqual:
        case Scheme::FixedCustom: {
            plan = fixed_plan(ctx, m);
            for (std::size_t i = 0; i < spec.groups.size(); ++i) {
                for (std::size_t j = 0; j < spec.groups[i].size(); ++j) {
                    const std::int64_t total = spec.is_flat() ? plan.per_subsystem[j]
                                                              : plan.per_component[i][j];
                    ledger.counts[i][j] = {total, rand_binomial(rng, total, p[i][j])};
                    ledger.stage_one[i][j] = {0, 0};
                }
            }
            break;
        }
    }

    ReplicationRecord record;
    record.posterior_variance = posterior_variance(spec, ledger);
    const double estimate = estimate_reliability(spec, ledger);
    const double truth = system_reliability(spec, p);
    record.squared_error = (estimate - truth) * (estimate - truth);
    return record;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::TwoStage: return "two_stage";
        case Scheme::Hybrid: return "hybrid";
        case Scheme::FixedEqual: return "fixed_equal";
        case Scheme::FixedCustom: return "fixed_custom";
    }
    return "unknown";
}

const char* loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::PosteriorVariance: return "posterior_variance";
        case LossMode::SquaredError: return "squared_error";
        case LossMode::Both: return "both";
    }
    return "unknown";
}

void validate(const SimulationConfig& config) {
    validate(config.system);
    if (config.replications < 1) throw ConfigError("replications must be at least 1");
    const bool flat = config.system.is_flat();
    if (config.scheme == Scheme::TwoStage && !flat)
        throw ConfigError("the two-stage scheme applies to flat parallel/series systems");
    if (config.scheme == Scheme::Hybrid && flat)
        throw ConfigError("the hybrid scheme applies to parallel-series systems");
    for (std::int64_t m : config.m_grid) check_feasible(config, m);
}

void check_feasible(const SimulationConfig& config, std::int64_t m) {
    switch (config.scheme) {
        case Scheme::TwoStage: {
            if (m < 1) throw ConfigError("sample size m must be positive");
            const auto n = static_cast<std::int64_t>(config.system.groups[0].size());
            if (n * stage_one_size(m) > m) throw InfeasibleError("sample budget too small");
            break;
        }
        case Scheme::Hybrid: {
            if (m < 1) throw ConfigError("sample size m must be positive");
            const std::int64_t l = stage_one_size(m);
            const std::int64_t lt = stage_one_size(l);
            std::int64_t stage_one_total = 0;
            for (const auto& g : config.system.groups)
                stage_one_total += static_cast<std::int64_t>(g.size()) * lt;
            const auto n = static_cast<std::int64_t>(config.system.groups.size());
            if (stage_one_total > m || n * l > m)
                throw InfeasibleError("sample budget too small");
            break;
        }
        case Scheme::FixedEqual:
            if (m < 0) throw ConfigError("sample size m must be non-negative");
            break;
        case Scheme::FixedCustom:
            fixed_custom_plan(m, config.system, config.custom_allocation);
            break;
    }
}

ReplicationRecord run_replication(const SimulationConfig& config, std::int64_t m,
                                  std::int64_t replication_index) {
    validate(config);
    check_feasible(config, m);
    const Context ctx = make_context(config);
    return replicate(ctx, m,
                     stream_for(config.master_seed,
                                static_cast<std::uint64_t>(replication_index), kReplicationSalt));
}

RiskRow estimate_bayes_risk(const SimulationConfig& config, std::int64_t m) {
    validate(config);
    check_feasible(config, m);
    const Context ctx = make_context(config);
    const std::int64_t reps = config.replications;

    std::vector<double> pv(static_cast<std::size_t>(reps));
    std::vector<double> sq(static_cast<std::size_t>(reps));

    const int threads =
        static_cast<int>(std::min<std::int64_t>(resolve_threads(config.threads), reps));
    auto work = [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t r = begin; r < end; ++r) {
            const ReplicationRecord rec = replicate(
                ctx, m, stream_for(config.master_seed, static_cast<std::uint64_t>(r),
                                   kReplicationSalt));
            pv[static_cast<std::size_t>(r)] = rec.posterior_variance;
            sq[static_cast<std::size_t>(r)] = rec.squared_error;
        }
    };
    if (threads <= 1) {
        work(0, reps);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            const std::int64_t begin = reps * t / threads;
            const std::int64_t end = reps * (t + 1) / threads;
            pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    // Fixed-order compensated reduction: thread count cannot change a byte.
    auto reduce = [reps](const std::vector<double>& xs, double& mean, double& se) {
        CompensatedSum sum, sumsq;
        for (double x : xs) {
            sum.add(x);
            sumsq.add(x * x);
        }
        const auto n = static_cast<double>(reps);
        mean = sum.value() / n;
        if (reps < 2) {
            se = kNaN;
            return;
        }
        const double var = std::max(0.0, (sumsq.value() - n * mean * mean) / (n - 1.0));
        se = std::sqrt(var / n);
    };

    RiskRow row;
    row.m = m;
    row.scheme = config.scheme;
    row.replications = reps;
    row.seed = config.master_seed;
    row.target_constant = target_constant(config.system);
    double pv_mean, pv_se, sq_mean, sq_se;
    reduce(pv, pv_mean, pv_se);
    reduce(sq, sq_mean, sq_se);
    if (config.loss_mode == LossMode::SquaredError) {
        row.risk_estimate = sq_mean;
        row.std_error = sq_se;
        row.alt_risk_estimate = kNaN;
        row.alt_std_error = kNaN;
    } else {
        row.risk_estimate = pv_mean;
        row.std_error = pv_se;
        const bool both = config.loss_mode == LossMode::Both;
        row.alt_risk_estimate = both ? sq_mean : kNaN;
        row.alt_std_error = both ? sq_se : kNaN;
    }
    row.m_times_risk = static_cast<double>(m) * row.risk_estimate;
    return row;
}

RiskReport convergence_study(const SimulationConfig& config) {
    validate(config);
    RiskReport report;
    report.reserve(config.m_grid.size());
    for (std::int64_t m : config.m_grid) report.push_back(estimate_bayes_risk(config, m));
    return report;
}

FractionStudy fraction_study(const SimulationConfig& config, std::int64_t m,
                             const std::vector<std::vector<double>>& p_true) {
    validate(config);
    check_feasible(config, m);
    if (config.scheme != Scheme::TwoStage && config.scheme != Scheme::Hybrid)
        throw ConfigError("fraction study requires a sequential scheme");
    const Context ctx = make_context(config);
    system_reliability(config.system, p_true);  // shape and range check

    std::vector<std::vector<double>> p = p_true;
    if (ctx.dualized)
        for (auto& g : p)
            for (double& v : g) v = 1.0 - v;

    SplitMix64 rng = stream_for(config.master_seed, 0, kFractionSalt);
    FractionStudy out;
    if (ctx.scheme == Scheme::TwoStage) {
        const std::int64_t l = stage_one_size(m);
        const auto& priors = ctx.spec.groups[0];
        std::vector<ComponentCounts> first(priors.size());
        for (std::size_t j = 0; j < priors.size(); ++j)
            first[j] = {l, rand_binomial(rng, l, p[0][j])};
        out.plan = two_stage_allocate(m, priors, first);
        std::vector<double> v(priors.size());
        for (std::size_t j = 0; j < priors.size(); ++j) {
            double term = p[0][j] * (1.0 - p[0][j]);
            for (std::size_t k = 0; k < priors.size(); ++k)
                if (k != j) term *= (1.0 - p[0][k]) * (1.0 - p[0][k]);
            v[j] = term;
        }
        double denom = 0.0;
        for (double x : v) denom += std::sqrt(x);
        out.target.resize(v.size());
        for (std::size_t j = 0; j < v.size(); ++j) out.target[j] = std::sqrt(v[j]) / denom;
    } else {
        const std::int64_t lt = stage_one_size(stage_one_size(m));
        std::vector<std::vector<ComponentCounts>> first(ctx.spec.groups.size());
        for (std::size_t i = 0; i < ctx.spec.groups.size(); ++i) {
            first[i].resize(ctx.spec.groups[i].size());
            for (std::size_t j = 0; j < ctx.spec.groups[i].size(); ++j)
                first[i][j] = {lt, rand_binomial(rng, lt, p[i][j])};
        }
        out.plan = hybrid_allocate(m, ctx.spec, first);
        // targets sqrt(B_i Z_i) with Z_i from the true subsystem reliabilities
        const std::size_t n = ctx.spec.groups.size();
        std::vector<double> sub(n);
        for (std::size_t i = 0; i < n; ++i) {
            double q = 1.0;
            for (double x : p[i]) q *= 1.0 - x;
            sub[i] = 1.0 - q;
        }
        std::vector<double> bz(n);
        for (std::size_t i = 0; i < n; ++i) {
            double z = 1.0;
            for (std::size_t l2 = 0; l2 < n; ++l2)
                if (l2 != i) z *= sub[l2] * sub[l2];
            bz[i] = b_constant(ctx.spec.groups[i]) * z;
        }
        double denom = 0.0;
        for (double x : bz) denom += std::sqrt(x);
        out.target.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.target[i] = std::sqrt(bz[i]) / denom;
    }
    out.realized.resize(out.plan.per_subsystem.size());
    for (std::size_t i = 0; i < out.realized.size(); ++i)
        out.realized[i] =
            static_cast<double>(out.plan.per_subsystem[i]) / static_cast<double>(m);
    return out;
}

double target_constant(const SystemSpec& spec) {
    validate(spec);
    SystemSpec canonical = spec;
    if (spec.topology == Topology::Series || spec.topology == Topology::SeriesParallel)
        canonical = dualize(spec);
    if (canonical.topology == Topology::Parallel)
        return asymptotic_constant_parallel(canonical.groups[0]);
    return asymptotic_constant_hybrid(canonical);
}

}  // namespace relalloc
