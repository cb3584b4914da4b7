#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relalloc/allocation.hpp"
#include "relalloc/risk.hpp"
#include "relalloc/simulation.hpp"
#include "test_support.hpp"

using namespace relalloc;
using testutil::flat;
using testutil::flat_ledger;
using testutil::grouped;
using testutil::grouped_ledger;

TEST_CASE("stage one size is the integer square root") {
    CHECK(stage_one_size(100) == 10);
    CHECK(stage_one_size(99) == 9);
    CHECK(stage_one_size(1) == 1);
    CHECK_THROWS_AS(stage_one_size(0), ConfigError);
}

TEST_CASE("symmetric stage-one data forces an equal split") {
    const std::vector<BetaParams> priors{{1, 1}, {1, 1}};
    const AllocationPlan plan = two_stage_allocate(100, priors, {{10, 5}, {10, 5}});
    CHECK(plan.total == 100);
    CHECK(plan.stage_one == 10);
    CHECK(plan.per_subsystem == std::vector<std::int64_t>{50, 50});
}

TEST_CASE("lopsided stage-one data shifts the budget to the informative side") {
    // Component 1 all failures, component 2 all successes.  The all-success
    // component dominates the risk (its factor (1-p_1)^2 stays near one), so
    // it receives most of the remaining budget:
    //   U_1 = (11/156)(2/156), U_2 = (11/156)(132/156), sqrt(U_2/U_1) = sqrt(66),
    //   m-hat_1 = 100 / (1 + sqrt(66)) ~ 10.96 -> plan (10, 90).
    const std::vector<BetaParams> priors{{1, 1}, {1, 1}};
    const AllocationPlan plan = two_stage_allocate(100, priors, {{10, 0}, {10, 10}});
    CHECK(plan.per_subsystem == std::vector<std::int64_t>{10, 90});
}

TEST_CASE("the corrector floors small predictors at L") {
    // m-hat_1 = 25 * sqrt(U_1) / (sqrt(U_1)+sqrt(U_2)) ~ 4.48 < L = 5.
    const std::vector<BetaParams> priors{{1, 1}, {1, 1}};
    const AllocationPlan plan = two_stage_allocate(25, priors, {{5, 0}, {5, 5}});
    CHECK(plan.per_subsystem == std::vector<std::int64_t>{5, 20});
}

TEST_CASE("two-stage preconditions") {
    const std::vector<BetaParams> priors{{1, 1}, {1, 1}};
    CHECK_THROWS_AS(two_stage_allocate(100, priors, {{9, 0}, {10, 5}}), ShapeError);
    const std::vector<BetaParams> four(4, BetaParams{1, 1});
    // m = 9 gives L = 3 and 4*3 > 9
    CHECK_THROWS_AS(
        two_stage_allocate(9, four, std::vector<ComponentCounts>{{3, 1}, {3, 1}, {3, 1}, {3, 1}}),
        InfeasibleError);
}

TEST_CASE("predictor shares sum to the total") {
    SplitMix64 rng(31);
    for (int it = 0; it < 200; ++it) {
        const int n = 1 + static_cast<int>(rng.next_double() * 5);
        std::vector<double> weights;
        for (int i = 0; i < n; ++i) weights.push_back(1e-6 + rng.next_double());
        const std::vector<double> shares = predictor_shares(1000, weights);
        const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
        CHECK(sum == doctest::Approx(1000.0).epsilon(1e-12));
    }
}

TEST_CASE("plans satisfy their structural invariants on random inputs") {
    SplitMix64 rng(32);
    for (int it = 0; it < 300; ++it) {
        const int n = 1 + static_cast<int>(rng.next_double() * 5);
        const std::int64_t m =
            static_cast<std::int64_t>(n) * 12 + static_cast<std::int64_t>(rng.next_double() * 400);
        const std::int64_t l = stage_one_size(m);
        std::vector<BetaParams> priors;
        std::vector<ComponentCounts> counts;
        for (int i = 0; i < n; ++i) {
            priors.push_back(testutil::random_prior(rng));
            counts.push_back(
                {l, static_cast<std::int64_t>(rng.next_double() * static_cast<double>(l + 1))});
        }
        if (static_cast<std::int64_t>(n) * l > m) continue;
        const AllocationPlan plan = two_stage_allocate(m, priors, counts);
        validate_plan(plan, flat(Topology::Parallel, priors));
        CHECK(std::accumulate(plan.per_subsystem.begin(), plan.per_subsystem.end(),
                              std::int64_t{0}) == m);
        for (std::int64_t v : plan.per_subsystem) CHECK(v >= l);
    }
}

TEST_CASE("permuting components permutes the plan") {
    SplitMix64 rng(33);
    for (int it = 0; it < 100; ++it) {
        const std::int64_t m = 64 + static_cast<std::int64_t>(rng.next_double() * 300);
        const std::int64_t l = stage_one_size(m);
        std::vector<BetaParams> priors;
        std::vector<ComponentCounts> counts;
        for (int i = 0; i < 3; ++i) {
            priors.push_back(testutil::random_prior(rng));
            counts.push_back(
                {l, static_cast<std::int64_t>(rng.next_double() * static_cast<double>(l + 1))});
        }
        const AllocationPlan base = two_stage_allocate(m, priors, counts);
        // rotate left by one
        std::vector<BetaParams> rp{priors[1], priors[2], priors[0]};
        std::vector<ComponentCounts> rc{counts[1], counts[2], counts[0]};
        const AllocationPlan rotated = two_stage_allocate(m, rp, rc);
        // the remainder slot moves with the permutation, so compare the two
        // non-remainder entries against their images
        CHECK(rotated.per_subsystem[0] == base.per_subsystem[1]);
        // totals always match
        CHECK(std::accumulate(rotated.per_subsystem.begin(), rotated.per_subsystem.end(),
                              std::int64_t{0}) == m);
    }
}

TEST_CASE("hybrid allocation splits a symmetric system evenly") {
    const SystemSpec spec = grouped(Topology::ParallelSeries,
                                    {{{1, 1}, {1, 1}}, {{1, 1}, {1, 1}}});
    const std::vector<std::vector<ComponentCounts>> data{{{3, 2}, {3, 2}}, {{3, 2}, {3, 2}}};
    const AllocationPlan plan = hybrid_allocate(100, spec, data);
    CHECK(plan.stage_one == 10);
    CHECK(plan.stage_one_inner == 3);
    CHECK(plan.per_subsystem == std::vector<std::int64_t>{50, 50});
    CHECK(plan.per_component[0] == std::vector<std::int64_t>{25, 25});
    CHECK(plan.per_component[1] == std::vector<std::int64_t>{25, 25});
}

TEST_CASE("hybrid allocation matches the worked two-subsystem example") {
    // Stage one: 3/3 successes vs 0/3.  w_1 = E[p_2^2 | Beta(1,4)] = 1/15,
    // w_2 = E[p_1^2 | Beta(4,1)] = 2/3, B_1 = B_2 = 1/6, so
    // m-tilde_1 = floor(100 / (1 + sqrt(10))) = 24.
    const SystemSpec spec = grouped(Topology::ParallelSeries, {{{1, 1}}, {{1, 1}}});
    const std::vector<std::vector<ComponentCounts>> data{{{3, 3}}, {{3, 0}}};
    const AllocationPlan plan = hybrid_allocate(100, spec, data);
    CHECK(plan.per_subsystem == std::vector<std::int64_t>{24, 76});
    CHECK(plan.per_component[0] == std::vector<std::int64_t>{24});
    CHECK(plan.per_component[1] == std::vector<std::int64_t>{76});
}

TEST_CASE("a single-subsystem hybrid reduces to the flat engine at floor L tilde") {
    const SystemSpec spec = grouped(Topology::ParallelSeries, {{{1, 1}, {2, 3}}});
    const std::vector<std::vector<ComponentCounts>> data{{{3, 1}, {3, 2}}};
    const AllocationPlan plan = hybrid_allocate(144, spec, data);
    CHECK(plan.per_subsystem == std::vector<std::int64_t>{144});
    std::vector<double> u(2);
    for (std::size_t j = 0; j < 2; ++j) u[j] = u_weight(spec.groups[0], data[0], j);
    CHECK(plan.per_component[0] == sqrt_proportional_allocate(144, u, plan.stage_one_inner));
}

TEST_CASE("hybrid plans satisfy the nested invariants on random inputs") {
    SplitMix64 rng(34);
    for (int it = 0; it < 100; ++it) {
        const std::int64_t m = 150 + static_cast<std::int64_t>(rng.next_double() * 500);
        const std::int64_t lt = stage_one_size(stage_one_size(m));
        std::vector<std::vector<BetaParams>> priors(2);
        std::vector<std::vector<ComponentCounts>> data(2);
        for (auto g = 0; g < 2; ++g) {
            const int n = 1 + static_cast<int>(rng.next_double() * 2);
            for (int i = 0; i < n; ++i) {
                priors[static_cast<std::size_t>(g)].push_back(testutil::random_prior(rng));
                data[static_cast<std::size_t>(g)].push_back(
                    {lt, static_cast<std::int64_t>(rng.next_double() * static_cast<double>(lt + 1))});
            }
        }
        const SystemSpec spec = grouped(Topology::ParallelSeries, priors);
        const AllocationPlan plan = hybrid_allocate(m, spec, data);
        validate_plan(plan, spec);
    }
}

TEST_CASE("duality transform") {
    const SystemSpec series = flat(Topology::Series, {{2, 3}});
    const SystemSpec dual = dualize(series);
    CHECK(dual.topology == Topology::Parallel);
    CHECK(dual.groups[0][0] == BetaParams{3, 2});
    CHECK(dualize(dual) == series);

    SplitMix64 rng(35);
    for (int it = 0; it < 100; ++it) {
        const int n = 1 + static_cast<int>(rng.next_double() * 4);
        std::vector<BetaParams> priors;
        std::vector<ComponentCounts> counts;
        for (int i = 0; i < n; ++i) {
            priors.push_back(testutil::random_prior(rng));
            counts.push_back(testutil::random_counts(rng, 20));
        }
        const SystemSpec spec = flat(Topology::Series, priors);
        const ObservationLedger ledger = flat_ledger(counts);
        CHECK(posterior_variance(spec, ledger) ==
              doctest::Approx(posterior_variance(dualize(spec), dualize(ledger)))
                  .epsilon(1e-13));
    }
}

TEST_CASE("fixed plans") {
    const SystemSpec two = flat(Topology::Parallel, {{1, 1}, {1, 1}});
    CHECK(fixed_equal_plan(16, two).per_subsystem == std::vector<std::int64_t>{8, 8});
    CHECK(fixed_equal_plan(17, two).per_subsystem == std::vector<std::int64_t>{9, 8});
    CHECK_THROWS_AS(fixed_custom_plan(16, two, {{9, 8}}), ConfigError);
    CHECK(fixed_custom_plan(17, two, {{9, 8}}).per_subsystem ==
          std::vector<std::int64_t>{9, 8});
}

TEST_CASE("realized fractions approach the almost-sure limits") {
    // Lemma-level check at m = 10^6: |m_i/m - sqrt(V_i)/sum| <= 0.02.
    SimulationConfig config;
    config.system = flat(Topology::Parallel, {{1, 1}, {1, 1}});
    config.scheme = Scheme::TwoStage;
    config.m_grid = {1000000};
    config.master_seed = 404;
    const FractionStudy study = fraction_study(config, 1000000, {{0.2, 0.8}});
    REQUIRE(study.realized.size() == 2);
    CHECK(study.target[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(study.target[1] == doctest::Approx(0.8).epsilon(1e-12));
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(std::abs(study.realized[i] - study.target[i]) <= 0.02);

    SimulationConfig hybrid;
    hybrid.system = grouped(Topology::ParallelSeries, {{{1, 1}}, {{1, 1}}});
    hybrid.scheme = Scheme::Hybrid;
    hybrid.m_grid = {1000000};
    hybrid.master_seed = 405;
    const FractionStudy hs = fraction_study(hybrid, 1000000, {{0.2}, {0.8}});
    CHECK(hs.target[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(hs.target[1] == doctest::Approx(0.2).epsilon(1e-12));
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(std::abs(hs.realized[i] - hs.target[i]) <= 0.02);
}
