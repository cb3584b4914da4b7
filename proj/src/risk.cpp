#include "relalloc/risk.hpp"

#include <cmath>

namespace relalloc {

namespace {

void require_parallel_series(const SystemSpec& spec, const char* what) {
    if (spec.topology != Topology::ParallelSeries)
        throw ShapeError(std::string(what) + " requires a parallel-series system; dualize first");
}

// E[(sum_j sqrt(V_j))^2] for one parallel group, where
// V_j = p_j(1-p_j) prod_{l!=j} (1-p_l)^2 and the expectation runs over the
// given beta laws.  Expanding the square and using independence:
//   sum_j E[V_j] + sum_{j!=k} E[p_j^(1/2) q_j^(3/2)] E[p_k^(1/2) q_k^(3/2)]
//                            prod_{l!=j,k} E[q_l^2].
double sum_sqrt_v_squared(const std::vector<BetaParams>& priors) {
    const std::size_t n = priors.size();
    std::vector<double> pq(n), q2(n), half(n);
    for (std::size_t j = 0; j < n; ++j) {
        pq[j] = beta_moment(priors[j], 1.0, 1.0);
        q2[j] = beta_moment(priors[j], 0.0, 2.0);
        half[j] = beta_moment(priors[j], 0.5, 1.5);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double term = pq[j];
        for (std::size_t l = 0; l < n; ++l)
            if (l != j) term *= q2[l];
        total += term;
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k) {
            double term = half[j] * half[k];
            for (std::size_t l = 0; l < n; ++l)
                if (l != j && l != k) term *= q2[l];
            total += 2.0 * term;
        }
    }
    return total;
}

}  // namespace

double u_weight(const std::vector<BetaParams>& priors,
                const std::vector<ComponentCounts>& counts, std::size_t i) {
    if (priors.size() != counts.size())
        throw ShapeError("u_weight: priors and counts differ in length");
    if (i >= priors.size()) throw ShapeError("u_weight: component index out of range");
    double value = 1.0;
    for (std::size_t j = 0; j < priors.size(); ++j) {
        const BetaParams post = posterior_params(priors[j], counts[j]);
        value *= (j == i) ? mean_pq(post) : second_moment_q(post);
    }
    return value;
}

double posterior_variance(const SystemSpec& spec, const ObservationLedger& ledger) {
    validate(spec, ledger);
    switch (spec.topology) {
        case Topology::Parallel: {
            const GroupMoments g = parallel_group_moments(spec.groups[0], ledger.counts[0]);
            return g.second_moment - g.mean * g.mean;
        }
        case Topology::Series: {
            const GroupMoments g = series_group_moments(spec.groups[0], ledger.counts[0]);
            return g.second_moment - g.mean * g.mean;
        }
        case Topology::ParallelSeries: {
            // p = prod_i p_i with independent subsystem posteriors.
            double s2 = 1.0, m2 = 1.0;
            for (std::size_t i = 0; i < spec.groups.size(); ++i) {
                const GroupMoments g = parallel_group_moments(spec.groups[i], ledger.counts[i]);
                s2 *= g.second_moment;
                m2 *= g.mean * g.mean;
            }
            return s2 - m2;
        }
        case Topology::SeriesParallel: {
            // p = 1 - prod_i (1 - p_i); use E[(1-p_i)^2] = 1 - 2E[p_i] + E[p_i^2].
            double s2 = 1.0, m2 = 1.0;
            for (std::size_t i = 0; i < spec.groups.size(); ++i) {
                const GroupMoments g = series_group_moments(spec.groups[i], ledger.counts[i]);
                s2 *= 1.0 - 2.0 * g.mean + g.second_moment;
                m2 *= (1.0 - g.mean) * (1.0 - g.mean);
            }
            return s2 - m2;
        }
    }
    throw Error("unreachable topology");
}

double w_weight(const SystemSpec& spec, const ObservationLedger& ledger, std::size_t i) {
    require_parallel_series(spec, "w_weight");
    validate(spec, ledger);
    if (i >= spec.groups.size()) throw ShapeError("w_weight: subsystem index out of range");
    double value = 1.0;
    for (std::size_t l = 0; l < spec.groups.size(); ++l) {
        if (l == i) continue;
        value *= parallel_group_moments(spec.groups[l], ledger.counts[l]).second_moment;
    }
    return value;
}

double w_weight_alt(const SystemSpec& spec, const ObservationLedger& ledger, std::size_t i) {
    require_parallel_series(spec, "w_weight_alt");
    validate(spec, ledger);
    if (i >= spec.groups.size()) throw ShapeError("w_weight_alt: subsystem index out of range");
    double value = 1.0;
    for (std::size_t l = 0; l < spec.groups.size(); ++l) {
        if (l == i) continue;
        double lin = 1.0, quad = 1.0;
        for (std::size_t j = 0; j < spec.groups[l].size(); ++j) {
            const BetaParams post = posterior_params(spec.groups[l][j], ledger.counts[l][j]);
            const double r = post.total();
            lin *= post.beta / (r * (r + 1.0));  // extra (r+1) factor; see header
            quad *= second_moment_q(post);
        }
        value *= 1.0 - 2.0 * lin + quad;
    }
    return value;
}

double b_constant(const std::vector<BetaParams>& subsystem_priors) {
    if (subsystem_priors.empty()) throw ShapeError("b_constant: empty subsystem");
    for (const auto& prior : subsystem_priors) validate(prior);
    return sum_sqrt_v_squared(subsystem_priors);
}

double asymptotic_constant_parallel(const std::vector<BetaParams>& priors) {
    if (priors.empty()) throw ShapeError("asymptotic_constant_parallel: empty system");
    for (const auto& prior : priors) validate(prior);
    return sum_sqrt_v_squared(priors);
}

double asymptotic_constant_hybrid(const SystemSpec& spec) {
    require_parallel_series(spec, "asymptotic_constant_hybrid");
    validate(spec);
    const std::size_t n = spec.groups.size();
    std::vector<double> b(n), ep(n), ep2(n);
    for (std::size_t l = 0; l < n; ++l) {
        b[l] = b_constant(spec.groups[l]);
        // prior subsystem moments from component beta moments
        double q1 = 1.0, q2 = 1.0;
        for (const auto& prior : spec.groups[l]) {
            q1 *= beta_moment(prior, 0.0, 1.0);
            q2 *= beta_moment(prior, 0.0, 2.0);
        }
        ep[l] = 1.0 - q1;
        ep2[l] = 1.0 - 2.0 * q1 + q2;
    }
    // E[(sum_i sqrt(B_i Z_i))^2] with Z_i = prod_{l!=i} p_l^2:
    //   sum_i B_i prod_{l!=i} E[p_l^2]
    // + sum_{i!=k} sqrt(B_i B_k) E[p_i] E[p_k] prod_{l!=i,k} E[p_l^2].
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double term = b[i];
        for (std::size_t l = 0; l < n; ++l)
            if (l != i) term *= ep2[l];
        total += term;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
            double term = std::sqrt(b[i] * b[k]) * ep[i] * ep[k];
            for (std::size_t l = 0; l < n; ++l)
                if (l != i && l != k) term *= ep2[l];
            total += 2.0 * term;
        }
    }
    return total;
}

RiskWeights risk_weights(const SystemSpec& spec, const ObservationLedger& ledger) {
    require_parallel_series(spec, "risk_weights");
    validate(spec, ledger);
    RiskWeights out;
    out.u.resize(spec.groups.size());
    out.w.resize(spec.groups.size());
    out.b.resize(spec.groups.size());
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        out.u[i].resize(spec.groups[i].size());
        for (std::size_t j = 0; j < spec.groups[i].size(); ++j)
            out.u[i][j] = u_weight(spec.groups[i], ledger.counts[i], j);
        out.w[i] = w_weight(spec, ledger, i);
        out.b[i] = b_constant(spec.groups[i]);
    }
    return out;
}

}  // namespace relalloc
