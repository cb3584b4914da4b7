#include "relalloc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "relalloc/allocation.hpp"
#include "relalloc/risk.hpp"
#include "relalloc/rng.hpp"

namespace relalloc {

namespace {

constexpr std::uint64_t kConstantSalt = 3;

// Fixed chunk size decouples the reduction order from the thread count.
constexpr std::int64_t kMcChunk = 1 << 16;

struct FlatIndex {
    std::size_t group;
    std::size_t comp;
};

std::vector<FlatIndex> flatten(const SystemSpec& spec) {
    std::vector<FlatIndex> order;
    for (std::size_t i = 0; i < spec.groups.size(); ++i)
        for (std::size_t j = 0; j < spec.groups[i].size(); ++j) order.push_back({i, j});
    return order;
}

struct Accumulator {
    CompensatedSum risk;
    CompensatedSum mass;
    std::int64_t paths = 0;
    std::int64_t max_paths = 0;

    void leaf(double weight, double loss) {
        if (++paths > max_paths)
            throw BudgetExceededError("enumeration exceeds the path budget");
        risk.add(weight * loss);
        mass.add(weight);
    }
};

// Enumerates success counts for components order[k..] given per-component
// trial counts and priors-so-far, multiplying pmf weights down the tree.
void enumerate_counts(const SystemSpec& spec, const std::vector<FlatIndex>& order,
                      std::size_t k, const std::vector<BetaParams>& predictive,
                      const std::vector<std::int64_t>& trials, double weight,
                      ObservationLedger& ledger,
                      const std::function<void(double)>& at_leaf) {
    if (k == order.size()) {
        at_leaf(weight);
        return;
    }
    const auto [gi, cj] = order[k];
    const std::int64_t t = trials[k];
    for (std::int64_t s = 0; s <= t; ++s) {
        const double pmf = beta_binomial_pmf(predictive[k], t, s);
        auto& cell = ledger.counts[gi][cj];
        const ComponentCounts saved = cell;
        cell.trials += t;
        cell.successes += s;
        enumerate_counts(spec, order, k + 1, predictive, trials, weight * pmf, ledger,
                         at_leaf);
        cell = saved;
    }
}

ObservationLedger empty_ledger(const SystemSpec& spec) {
    ObservationLedger ledger;
    ledger.counts.resize(spec.groups.size());
    ledger.stage_one.resize(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        ledger.counts[i].resize(spec.groups[i].size());
        ledger.stage_one[i].resize(spec.groups[i].size());
    }
    return ledger;
}

std::vector<BetaParams> flat_priors(const SystemSpec& spec, const std::vector<FlatIndex>& order) {
    std::vector<BetaParams> out;
    out.reserve(order.size());
    for (const auto& [gi, cj] : order) out.push_back(spec.groups[gi][cj]);
    return out;
}

// Exact risk of a fully fixed allocation (flattened component sizes).
void accumulate_fixed(const SystemSpec& spec, const std::vector<FlatIndex>& order,
                      const std::vector<std::int64_t>& sizes, Accumulator& acc) {
    ObservationLedger ledger = empty_ledger(spec);
    const std::vector<BetaParams> priors = flat_priors(spec, order);
    enumerate_counts(spec, order, 0, priors, sizes, 1.0, ledger, [&](double w) {
        acc.leaf(w, posterior_variance(spec, ledger));
    });
}

std::vector<std::int64_t> plan_component_sizes(const AllocationPlan& plan,
                                               const std::vector<FlatIndex>& order,
                                               bool flat) {
    std::vector<std::int64_t> sizes(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        sizes[k] = flat ? plan.per_subsystem[order[k].comp]
                        : plan.per_component[order[k].group][order[k].comp];
    return sizes;
}

}  // namespace

double beta_binomial_pmf(const BetaParams& prior, std::int64_t trials, std::int64_t successes) {
    validate(prior);
    if (trials < 0 || successes < 0 || successes > trials)
        throw ConfigError("beta_binomial_pmf: successes must lie in [0, trials]");
    const auto t = static_cast<double>(trials);
    const auto s = static_cast<double>(successes);
    const double log_choose = log_gamma(t + 1.0) - log_gamma(s + 1.0) - log_gamma(t - s + 1.0);
    return std::exp(log_choose + log_beta(prior.alpha + s, prior.beta + t - s) -
                    log_beta(prior.alpha, prior.beta));
}

ExactRiskResult exact_scheme_risk(const SystemSpec& spec, Scheme scheme, std::int64_t m,
                                  const EnumerationBudget& budget,
                                  const std::vector<std::vector<std::int64_t>>*
                                      custom_allocation) {
    validate(spec);
    if (m < 0) throw ConfigError("sample size m must be non-negative");
    const std::vector<FlatIndex> order = flatten(spec);
    Accumulator acc;
    acc.max_paths = budget.max_paths;

    // The dual orientation supplies the scheme weights for series-style
    // topologies; the enumeration itself stays in the original orientation.
    const bool needs_dual =
        spec.topology == Topology::Series || spec.topology == Topology::SeriesParallel;
    const SystemSpec weight_spec = needs_dual ? dualize(spec) : spec;

    switch (scheme) {
        case Scheme::FixedEqual:
        case Scheme::FixedCustom: {
            AllocationPlan plan =
                scheme == Scheme::FixedEqual
                    ? fixed_equal_plan(m, spec)
                    : fixed_custom_plan(m, spec,
                                        custom_allocation ? *custom_allocation
                                                          : std::vector<std::vector<std::int64_t>>{});
            accumulate_fixed(spec, order, plan_component_sizes(plan, order, spec.is_flat()),
                             acc);
            break;
        }
        case Scheme::TwoStage: {
            if (!spec.is_flat())
                throw ConfigError("the two-stage scheme applies to flat parallel/series systems");
            const std::int64_t l = stage_one_size(m);
            ObservationLedger stage_one = empty_ledger(spec);
            const std::vector<BetaParams> priors = flat_priors(spec, order);
            const std::vector<std::int64_t> stage_one_trials(order.size(), l);
            enumerate_counts(spec, order, 0, priors, stage_one_trials, 1.0, stage_one,
                             [&](double w1) {
                // Scheme weights come from the dual orientation when needed.
                std::vector<ComponentCounts> weight_counts = stage_one.counts[0];
                if (needs_dual)
                    for (auto& c : weight_counts) c.successes = c.failures();
                const AllocationPlan plan =
                    two_stage_allocate(m, weight_spec.groups[0], weight_counts);
                std::vector<BetaParams> predictive(order.size());
                std::vector<std::int64_t> stage_two(order.size());
                for (std::size_t k = 0; k < order.size(); ++k) {
                    predictive[k] = posterior_params(priors[k], stage_one.counts[0][k]);
                    stage_two[k] = plan.per_subsystem[k] - l;
                }
                ObservationLedger ledger = stage_one;
                enumerate_counts(spec, order, 0, predictive, stage_two, w1, ledger,
                                 [&](double w) {
                    acc.leaf(w, posterior_variance(spec, ledger));
                });
            });
            break;
        }
        case Scheme::Hybrid: {
            if (spec.is_flat())
                throw ConfigError("the hybrid scheme applies to parallel-series systems");
            const std::int64_t lt = stage_one_size(stage_one_size(m));
            ObservationLedger stage_one = empty_ledger(spec);
            const std::vector<BetaParams> priors = flat_priors(spec, order);
            const std::vector<std::int64_t> stage_one_trials(order.size(), lt);
            enumerate_counts(spec, order, 0, priors, stage_one_trials, 1.0, stage_one,
                             [&](double w1) {
                auto weight_counts = stage_one.counts;
                if (needs_dual)
                    for (auto& g : weight_counts)
                        for (auto& c : g) c.successes = c.failures();
                const AllocationPlan plan = hybrid_allocate(m, weight_spec, weight_counts);
                std::vector<BetaParams> predictive(order.size());
                std::vector<std::int64_t> stage_two(order.size());
                for (std::size_t k = 0; k < order.size(); ++k) {
                    const auto [gi, cj] = order[k];
                    predictive[k] = posterior_params(priors[k], stage_one.counts[gi][cj]);
                    stage_two[k] = plan.per_component[gi][cj] - lt;
                }
                ObservationLedger ledger = stage_one;
                enumerate_counts(spec, order, 0, predictive, stage_two, w1, ledger,
                                 [&](double w) {
                    acc.leaf(w, posterior_variance(spec, ledger));
                });
            });
            break;
        }
    }
    return {acc.risk.value(), acc.mass.value(), acc.paths};
}

OptimalFixedResult optimal_fixed_allocation(const SystemSpec& spec, std::int64_t m,
                                            const EnumerationBudget& budget) {
    validate(spec);
    if (m < 0) throw ConfigError("sample size m must be non-negative");
    const std::vector<FlatIndex> order = flatten(spec);
    Accumulator acc;
    acc.max_paths = budget.max_paths;

    OptimalFixedResult best;
    bool have_best = false;
    std::vector<std::int64_t> sizes(order.size(), 0);

    // Lexicographic enumeration of compositions of m.
    auto visit = [&](auto&& self, std::size_t k, std::int64_t remaining) -> void {
        if (k + 1 == sizes.size()) {
            sizes[k] = remaining;
            Accumulator one;
            one.max_paths = acc.max_paths;
            one.paths = acc.paths;
            accumulate_fixed(spec, order, sizes, one);
            acc.paths = one.paths;
            const double risk = one.risk.value();
            if (!have_best || risk < best.risk) {
                best.allocation = sizes;
                best.risk = risk;
                have_best = true;
            }
            return;
        }
        for (std::int64_t v = 0; v <= remaining; ++v) {
            sizes[k] = v;
            self(self, k + 1, remaining - v);
        }
    };
    visit(visit, 0, m);
    return best;
}

namespace {

struct ChunkStat {
    double sum = 0.0;
    double sumsq = 0.0;
};

McEstimate mc_reduce(const std::vector<ChunkStat>& chunks, std::int64_t draws) {
    CompensatedSum sum, sumsq;
    for (const auto& c : chunks) {
        sum.add(c.sum);
        sumsq.add(c.sumsq);
    }
    const auto n = static_cast<double>(draws);
    McEstimate out;
    out.draws = draws;
    out.mean = sum.value() / n;
    const double var = std::max(0.0, (sumsq.value() - n * out.mean * out.mean) / (n - 1.0));
    out.std_error = std::sqrt(var / n);
    return out;
}

template <typename DrawFn>
McEstimate mc_run(std::int64_t draws, std::uint64_t seed, int threads, DrawFn&& draw_value) {
    if (draws < 2) throw ConfigError("constant checks need at least 2 draws");
    const std::int64_t n_chunks = (draws + kMcChunk - 1) / kMcChunk;
    std::vector<ChunkStat> chunks(static_cast<std::size_t>(n_chunks));
    auto run_chunk = [&](std::int64_t c) {
        const std::int64_t begin = c * kMcChunk;
        const std::int64_t end = std::min(draws, begin + kMcChunk);
        CompensatedSum sum, sumsq;
        for (std::int64_t i = begin; i < end; ++i) {
            SplitMix64 rng = stream_for(seed, static_cast<std::uint64_t>(i), kConstantSalt);
            const double v = draw_value(rng);
            sum.add(v);
            sumsq.add(v * v);
        }
        chunks[static_cast<std::size_t>(c)] = {sum.value(), sumsq.value()};
    };
    int t = threads;
    if (t <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        t = hw > 0 ? static_cast<int>(hw) : 1;
    }
    if (t <= 1 || n_chunks == 1) {
        for (std::int64_t c = 0; c < n_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        const int workers = static_cast<int>(std::min<std::int64_t>(t, n_chunks));
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::int64_t c = w; c < n_chunks; c += workers) run_chunk(c);
            });
        }
        for (auto& th : pool) th.join();
    }
    return mc_reduce(chunks, draws);
}

}  // namespace

McEstimate mc_constant_parallel(const std::vector<BetaParams>& priors, std::int64_t draws,
                                std::uint64_t seed, int threads) {
    if (priors.empty()) throw ShapeError("mc_constant_parallel: empty system");
    for (const auto& prior : priors) validate(prior);
    return mc_run(draws, seed, threads, [&](SplitMix64& rng) {
        double sum_sqrt = 0.0;
        std::vector<double> p(priors.size());
        for (std::size_t i = 0; i < priors.size(); ++i) p[i] = rand_beta(rng, priors[i]);
        for (std::size_t i = 0; i < priors.size(); ++i) {
            double v = p[i] * (1.0 - p[i]);
            for (std::size_t j = 0; j < priors.size(); ++j)
                if (j != i) v *= (1.0 - p[j]) * (1.0 - p[j]);
            sum_sqrt += std::sqrt(v);
        }
        return sum_sqrt * sum_sqrt;
    });
}

McEstimate mc_constant_hybrid(const SystemSpec& spec, std::int64_t draws, std::uint64_t seed,
                              int threads) {
    validate(spec);
    if (spec.topology != Topology::ParallelSeries)
        throw ShapeError("mc_constant_hybrid requires a parallel-series system; dualize first");
    std::vector<double> b(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i) b[i] = b_constant(spec.groups[i]);
    return mc_run(draws, seed, threads, [&](SplitMix64& rng) {
        const std::size_t n = spec.groups.size();
        std::vector<double> sub(n);
        for (std::size_t i = 0; i < n; ++i) {
            double q = 1.0;
            for (const auto& prior : spec.groups[i]) q *= 1.0 - rand_beta(rng, prior);
            sub[i] = 1.0 - q;
        }
        double sum_sqrt = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b[i];
            for (std::size_t l = 0; l < n; ++l)
                if (l != i) z *= sub[l] * sub[l];
            sum_sqrt += std::sqrt(z);
        }
        return sum_sqrt * sum_sqrt;
    });
}

}  // namespace relalloc
