#include "relalloc/core_model.hpp"

#include <cmath>
#include <limits>

namespace relalloc {

const char* topology_name(Topology t) {
    switch (t) {
        case Topology::Parallel: return "parallel";
        case Topology::Series: return "series";
        case Topology::ParallelSeries: return "parallel-series";
        case Topology::SeriesParallel: return "series-parallel";
    }
    return "unknown";
}

std::size_t SystemSpec::component_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
}

void validate(const BetaParams& prior) {
    if (!(prior.alpha > 0.0) || !std::isfinite(prior.alpha))
        throw ConfigError("alpha must be a positive finite real");
    if (!(prior.beta > 0.0) || !std::isfinite(prior.beta))
        throw ConfigError("beta must be a positive finite real");
}

void validate(const ComponentCounts& counts) {
    if (counts.trials < 0) throw ConfigError("trials must be non-negative");
    if (counts.successes < 0 || counts.successes > counts.trials)
        throw ConfigError("successes must lie in [0, trials]");
}

void validate(const SystemSpec& spec) {
    if (spec.groups.empty()) throw ConfigError("system needs at least one group");
    for (const auto& g : spec.groups) {
        if (g.empty()) throw ConfigError("every group needs at least one component");
        for (const auto& prior : g) validate(prior);
    }
    if (spec.is_flat() && spec.groups.size() != 1)
        throw ConfigError("flat parallel/series systems must consist of exactly one group");
}

void validate(const SystemSpec& spec, const ObservationLedger& ledger) {
    validate(spec);
    if (ledger.counts.size() != spec.groups.size())
        throw ShapeError("ledger group count does not match system spec");
    if (!ledger.stage_one.empty() && ledger.stage_one.size() != spec.groups.size())
        throw ShapeError("stage-one ledger group count does not match system spec");
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        if (ledger.counts[i].size() != spec.groups[i].size())
            throw ShapeError("ledger component count does not match system spec");
        for (const auto& c : ledger.counts[i]) validate(c);
        if (ledger.stage_one.empty()) continue;
        if (ledger.stage_one[i].size() != spec.groups[i].size())
            throw ShapeError("stage-one component count does not match system spec");
        for (std::size_t j = 0; j < spec.groups[i].size(); ++j) {
            const auto& s1 = ledger.stage_one[i][j];
            validate(s1);
            if (s1.trials > ledger.counts[i][j].trials ||
                s1.successes > ledger.counts[i][j].successes)
                throw ShapeError("stage-one counts exceed ledger totals");
        }
    }
}

BetaParams posterior_params(const BetaParams& prior, const ComponentCounts& counts) {
    return {prior.alpha + static_cast<double>(counts.successes),
            prior.beta + static_cast<double>(counts.failures())};
}

// lgamma_r avoids the signgam global of plain lgamma under concurrent use.
double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

double log_beta(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

namespace {

bool small_integer(double x, int& out) {
    double r = std::round(x);
    if (std::abs(x - r) > 0.0 || r < 0.0 || r > 64.0) return false;
    out = static_cast<int>(r);
    return true;
}

}  // namespace

double beta_moment(const BetaParams& params, double s, double t) {
    if (!(s >= 0.0) || !(t >= 0.0))
        throw ConfigError("beta_moment exponents must be non-negative");
    int si = 0, ti = 0;
    if (small_integer(s, si) && small_integer(t, ti)) {
        // E[p^s (1-p)^t] = prod_k (alpha+k)/(r+k) * prod_k (beta+k)/(r+s+k)
        const double r = params.total();
        double value = 1.0;
        for (int k = 0; k < si; ++k) value *= (params.alpha + k) / (r + k);
        for (int k = 0; k < ti; ++k) value *= (params.beta + k) / (r + si + k);
        return value;
    }
    return std::exp(log_beta(params.alpha + s, params.beta + t) -
                    log_beta(params.alpha, params.beta));
}

double mean_p(const BetaParams& post) { return post.alpha / post.total(); }
double mean_q(const BetaParams& post) { return post.beta / post.total(); }

double second_moment_p(const BetaParams& post) {
    const double r = post.total();
    return post.alpha * (post.alpha + 1.0) / (r * (r + 1.0));
}

double second_moment_q(const BetaParams& post) {
    const double r = post.total();
    return post.beta * (post.beta + 1.0) / (r * (r + 1.0));
}

double mean_pq(const BetaParams& post) {
    const double r = post.total();
    return post.alpha * post.beta / (r * (r + 1.0));
}

GroupMoments parallel_group_moments(const std::vector<BetaParams>& priors,
                                    const std::vector<ComponentCounts>& counts) {
    // p = 1 - prod q_j, so E[p] = 1 - prod E[q_j] and
    // E[p^2] = 1 - 2 prod E[q_j] + prod E[q_j^2] by posterior independence.
    double q1 = 1.0, q2 = 1.0;
    for (std::size_t j = 0; j < priors.size(); ++j) {
        const BetaParams post = posterior_params(priors[j], counts[j]);
        q1 *= mean_q(post);
        q2 *= second_moment_q(post);
    }
    return {1.0 - q1, 1.0 - 2.0 * q1 + q2};
}

GroupMoments series_group_moments(const std::vector<BetaParams>& priors,
                                  const std::vector<ComponentCounts>& counts) {
    double p1 = 1.0, p2 = 1.0;
    for (std::size_t j = 0; j < priors.size(); ++j) {
        const BetaParams post = posterior_params(priors[j], counts[j]);
        p1 *= mean_p(post);
        p2 *= second_moment_p(post);
    }
    return {p1, p2};
}

double estimate_reliability(const SystemSpec& spec, const ObservationLedger& ledger) {
    validate(spec, ledger);
    switch (spec.topology) {
        case Topology::Parallel:
            return parallel_group_moments(spec.groups[0], ledger.counts[0]).mean;
        case Topology::Series:
            return series_group_moments(spec.groups[0], ledger.counts[0]).mean;
        case Topology::ParallelSeries: {
            double prod = 1.0;
            for (std::size_t i = 0; i < spec.groups.size(); ++i)
                prod *= parallel_group_moments(spec.groups[i], ledger.counts[i]).mean;
            return prod;
        }
        case Topology::SeriesParallel: {
            double prod = 1.0;
            for (std::size_t i = 0; i < spec.groups.size(); ++i)
                prod *= 1.0 - series_group_moments(spec.groups[i], ledger.counts[i]).mean;
            return 1.0 - prod;
        }
    }
    throw Error("unreachable topology");
}

double system_reliability(const SystemSpec& spec, const std::vector<std::vector<double>>& p) {
    validate(spec);
    if (p.size() != spec.groups.size())
        throw ShapeError("reliability vector group count does not match system spec");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i].size() != spec.groups[i].size())
            throw ShapeError("reliability vector component count does not match system spec");
        for (double v : p[i])
            if (!(v > 0.0) || !(v < 1.0))
                throw ConfigError("component reliabilities must lie in (0,1)");
    }
    auto parallel_of = [](const std::vector<double>& xs) {
        double q = 1.0;
        for (double x : xs) q *= 1.0 - x;
        return 1.0 - q;
    };
    auto series_of = [](const std::vector<double>& xs) {
        double r = 1.0;
        for (double x : xs) r *= x;
        return r;
    };
    switch (spec.topology) {
        case Topology::Parallel: return parallel_of(p[0]);
        case Topology::Series: return series_of(p[0]);
        case Topology::ParallelSeries: {
            double prod = 1.0;
            for (const auto& g : p) prod *= parallel_of(g);
            return prod;
        }
        case Topology::SeriesParallel: {
            double prod = 1.0;
            for (const auto& g : p) prod *= 1.0 - series_of(g);
            return 1.0 - prod;
        }
    }
    throw Error("unreachable topology");
}

}  // namespace relalloc
