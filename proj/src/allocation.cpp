#include "relalloc/allocation.hpp"

#include <algorithm>
#include <cmath>

#include "relalloc/risk.hpp"

namespace relalloc {

std::int64_t stage_one_size(std::int64_t m) {
    if (m < 1) throw ConfigError("sample size m must be positive");
    auto l = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(m))));
    while ((l + 1) * (l + 1) <= m) ++l;
    while (l * l > m) --l;
    return l;
}

std::vector<double> predictor_shares(std::int64_t total, const std::vector<double>& weights) {
    double denom = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw Error("allocation weights must be positive and finite");
        denom += std::sqrt(w);
    }
    std::vector<double> shares(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i)
        shares[i] = static_cast<double>(total) * std::sqrt(weights[i]) / denom;
    return shares;
}

std::vector<std::int64_t> sqrt_proportional_allocate(std::int64_t total,
                                                     const std::vector<double>& weights,
                                                     std::int64_t floor_size) {
    const std::size_t n = weights.size();
    if (n == 0) throw ShapeError("cannot allocate to zero components");
    if (static_cast<std::int64_t>(n) * floor_size > total)
        throw InfeasibleError("sample budget too small");
    const std::vector<double> shares = predictor_shares(total, weights);
    std::vector<std::int64_t> sizes(n);
    std::int64_t used = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        sizes[i] = std::max(floor_size, static_cast<std::int64_t>(std::floor(shares[i])));
        used += sizes[i];
    }
    sizes[n - 1] = total - used;
    // Repair: the remainder slot can fall below the floor when earlier shares
    // round high; shave the largest donor one unit at a time.
    while (sizes[n - 1] < floor_size) {
        std::size_t donor = 0;
        for (std::size_t i = 1; i + 1 < n; ++i)
            if (sizes[i] > sizes[donor]) donor = i;
        if (sizes[donor] <= floor_size)
            throw InfeasibleError("sample budget too small");
        --sizes[donor];
        ++sizes[n - 1];
    }
    return sizes;
}

AllocationPlan two_stage_allocate(std::int64_t m, const std::vector<BetaParams>& priors,
                                  const std::vector<ComponentCounts>& stage_one_data) {
    if (priors.empty()) throw ShapeError("two_stage_allocate: no components");
    if (priors.size() != stage_one_data.size())
        throw ShapeError("two_stage_allocate: priors and stage-one data differ in length");
    const std::int64_t l = stage_one_size(m);
    if (static_cast<std::int64_t>(priors.size()) * l > m)
        throw InfeasibleError("sample budget too small");
    for (const auto& c : stage_one_data) {
        validate(c);
        if (c.trials != l)
            throw ShapeError("stage-one counts must hold exactly L trials per component");
    }
    std::vector<double> u(priors.size());
    for (std::size_t i = 0; i < priors.size(); ++i)
        u[i] = u_weight(priors, stage_one_data, i);
    AllocationPlan plan;
    plan.total = m;
    plan.stage_one = l;
    plan.per_subsystem = sqrt_proportional_allocate(m, u, l);
    return plan;
}

AllocationPlan hybrid_allocate(std::int64_t m, const SystemSpec& spec,
                               const std::vector<std::vector<ComponentCounts>>& stage_one_data) {
    if (spec.topology != Topology::ParallelSeries)
        throw ShapeError("hybrid_allocate requires a parallel-series system; dualize first");
    validate(spec);
    const std::int64_t l = stage_one_size(m);
    const std::int64_t lt = stage_one_size(l);
    const auto n = static_cast<std::int64_t>(spec.groups.size());
    std::int64_t stage_one_total = 0;
    for (const auto& g : spec.groups) stage_one_total += static_cast<std::int64_t>(g.size()) * lt;
    if (stage_one_total > m || n * l > m)
        throw InfeasibleError("sample budget too small");

    ObservationLedger stage_one{stage_one_data, stage_one_data};
    validate(spec, stage_one);
    for (const auto& g : stage_one_data)
        for (const auto& c : g)
            if (c.trials != lt)
                throw ShapeError("stage-one counts must hold exactly L-tilde trials per component");

    AllocationPlan plan;
    plan.total = m;
    plan.stage_one = l;
    plan.stage_one_inner = lt;

    // Subsystem level: split m proportionally to sqrt(B_i * w_i).
    std::vector<double> bw(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i)
        bw[i] = b_constant(spec.groups[i]) * w_weight(spec, stage_one, i);
    plan.per_subsystem = sqrt_proportional_allocate(m, bw, l);

    // Component level: each subsystem splits like a flat two-stage scheme
    // with floor L tilde.
    plan.per_component.resize(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        const auto ni = static_cast<std::int64_t>(spec.groups[i].size());
        if (ni * lt > plan.per_subsystem[i])
            throw InfeasibleError("sample budget too small");
        std::vector<double> u(spec.groups[i].size());
        for (std::size_t j = 0; j < spec.groups[i].size(); ++j)
            u[j] = u_weight(spec.groups[i], stage_one_data[i], j);
        plan.per_component[i] = sqrt_proportional_allocate(plan.per_subsystem[i], u, lt);
    }
    return plan;
}

AllocationPlan fixed_equal_plan(std::int64_t m, const SystemSpec& spec) {
    validate(spec);
    if (m < 0) throw ConfigError("sample size m must be non-negative");
    auto split = [](std::int64_t total, std::size_t n) {
        std::vector<std::int64_t> sizes(n, total / static_cast<std::int64_t>(n));
        for (std::int64_t i = 0; i < total % static_cast<std::int64_t>(n); ++i) ++sizes[i];
        return sizes;
    };
    AllocationPlan plan;
    plan.total = m;
    if (spec.is_flat()) {
        plan.per_subsystem = split(m, spec.groups[0].size());
        return plan;
    }
    plan.per_subsystem = split(m, spec.groups.size());
    plan.per_component.resize(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i)
        plan.per_component[i] = split(plan.per_subsystem[i], spec.groups[i].size());
    return plan;
}

AllocationPlan fixed_custom_plan(std::int64_t m, const SystemSpec& spec,
                                 const std::vector<std::vector<std::int64_t>>& allocation) {
    validate(spec);
    if (allocation.size() != spec.groups.size())
        throw ShapeError("custom allocation group count does not match system spec");
    AllocationPlan plan;
    plan.total = m;
    std::int64_t used = 0;
    plan.per_component.resize(allocation.size());
    plan.per_subsystem.resize(allocation.size());
    for (std::size_t i = 0; i < allocation.size(); ++i) {
        if (allocation[i].size() != spec.groups[i].size())
            throw ShapeError("custom allocation component count does not match system spec");
        std::int64_t group_total = 0;
        for (std::int64_t v : allocation[i]) {
            if (v < 0) throw ConfigError("custom allocation entries must be non-negative");
            group_total += v;
        }
        plan.per_component[i] = allocation[i];
        plan.per_subsystem[i] = group_total;
        used += group_total;
    }
    if (used != m)
        throw ConfigError("custom allocation must sum to m");
    if (spec.is_flat()) {
        plan.per_subsystem = allocation[0];
        plan.per_component.clear();
    }
    return plan;
}

SystemSpec dualize(const SystemSpec& spec) {
    SystemSpec dual = spec;
    switch (spec.topology) {
        case Topology::Parallel: dual.topology = Topology::Series; break;
        case Topology::Series: dual.topology = Topology::Parallel; break;
        case Topology::ParallelSeries: dual.topology = Topology::SeriesParallel; break;
        case Topology::SeriesParallel: dual.topology = Topology::ParallelSeries; break;
    }
    for (auto& g : dual.groups)
        for (auto& prior : g)
            std::swap(prior.alpha, prior.beta);
    return dual;
}

ObservationLedger dualize(const ObservationLedger& ledger) {
    ObservationLedger dual = ledger;
    for (auto& g : dual.counts)
        for (auto& c : g) c.successes = c.failures();
    for (auto& g : dual.stage_one)
        for (auto& c : g) c.successes = c.failures();
    return dual;
}

void validate_plan(const AllocationPlan& plan, const SystemSpec& spec) {
    validate(spec);
    const std::size_t outer =
        spec.is_flat() ? spec.groups[0].size() : spec.groups.size();
    if (plan.per_subsystem.size() != outer)
        throw ShapeError("plan size list does not match system spec");
    std::int64_t used = 0;
    for (std::int64_t v : plan.per_subsystem) {
        if (v < plan.stage_one) throw Error("plan entry below stage-one floor");
        used += v;
    }
    if (used != plan.total) throw Error("plan does not sum to m");
    if (plan.per_component.empty()) return;
    if (plan.per_component.size() != spec.groups.size())
        throw ShapeError("plan component lists do not match system spec");
    for (std::size_t i = 0; i < plan.per_component.size(); ++i) {
        if (plan.per_component[i].size() != spec.groups[i].size())
            throw ShapeError("plan component list does not match group size");
        std::int64_t group_used = 0;
        for (std::int64_t v : plan.per_component[i]) {
            if (v < plan.stage_one_inner) throw Error("plan entry below inner stage-one floor");
            group_used += v;
        }
        if (group_used != plan.per_subsystem[i])
            throw Error("component sizes do not sum to the subsystem size");
    }
}

}  // namespace relalloc
