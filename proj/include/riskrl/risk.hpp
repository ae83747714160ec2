#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "riskrl/common.hpp"
#include "riskrl/math.hpp"

namespace riskrl::risk {

inline constexpr double prob_tol = 1e-9;

/**
 * Finite distribution over scalar outcomes. Each atom carries an opaque
 * payload index (e.g. the candidate successor it came from) that survives
 * sorting and acts as the deterministic tiebreak for equal values.
 */
struct DiscreteDistribution {
    numvec values;
    std::vector<std::size_t> payloads;
    numvec weights;

    /// Uniform distribution with payloads 0..m-1.
    static DiscreteDistribution uniform(numvec vals) {
        DiscreteDistribution d;
        const std::size_t m = vals.size();
        d.values = std::move(vals);
        d.payloads.resize(m);
        for (std::size_t i = 0; i < m; ++i) d.payloads[i] = i;
        d.weights.assign(m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);
        return d;
    }

    std::size_t size() const { return values.size(); }

    void validate() const {
        require(!values.empty(), "DiscreteDistribution: support must be non-empty");
        require(payloads.size() == values.size() && weights.size() == values.size(),
                "DiscreteDistribution: misaligned fields");
        double total = 0.0;
        for (double w : weights) {
            require(w >= -prob_tol, "DiscreteDistribution: negative weight");
            total += w;
        }
        require(std::abs(total - 1.0) <= prob_tol,
                "DiscreteDistribution: weights must sum to 1");
        for (double v : values)
            require(std::isfinite(v), "DiscreteDistribution: non-finite value");
    }

    bool is_uniform() const {
        const double w = 1.0 / static_cast<double>(values.size());
        for (double x : weights)
            if (std::abs(x - w) > prob_tol) return false;
        return true;
    }
};

enum class RiskKind { Neutral, CVaR, Wang };

/// Which static risk measure to apply and its parameter
/// (alpha in (0,1] for CVaR, eta >= 0 for Wang, unused for Neutral).
struct RiskSpec {
    RiskKind kind = RiskKind::Neutral;
    double param = 0.0;

    static RiskSpec neutral() { return {RiskKind::Neutral, 0.0}; }
    static RiskSpec cvar(double alpha) { return {RiskKind::CVaR, alpha}; }
    static RiskSpec wang(double eta) { return {RiskKind::Wang, eta}; }

    void validate() const {
        if (kind == RiskKind::CVaR)
            require(param > 0.0 && param <= 1.0, "RiskSpec: CVaR requires 0 < alpha <= 1");
        if (kind == RiskKind::Wang)
            require(param >= 0.0, "RiskSpec: Wang requires eta >= 0");
    }

    std::string name() const {
        switch (kind) {
        case RiskKind::Neutral: return "neutral";
        case RiskKind::CVaR: return "cvar:" + std::to_string(param);
        case RiskKind::Wang: return "wang:" + std::to_string(param);
        }
        return "?";
    }
};

/// Perturbed probabilities xi(s') * T(s,a,s'), multiplied out and aligned
/// with the originating distribution's support order.
struct PerturbationWeights {
    numvec probabilities;
};

namespace detail {

/// Indices sorting values ascending, ties broken by payload index.
inline std::vector<std::size_t> ascending_order(const DiscreteDistribution& dist) {
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (dist.values[i] != dist.values[j]) return dist.values[i] < dist.values[j];
        return dist.payloads[i] < dist.payloads[j];
    });
    return order;
}

/// Smallest k with k >= alpha*m, robust to floating slack near integers.
inline std::size_t quantile_index(double alpha, std::size_t m) {
    const double am = alpha * static_cast<double>(m);
    const double fl = std::floor(am);
    std::size_t k;
    if (am - fl <= 1e-9 * std::max(1.0, am))
        k = static_cast<std::size_t>(fl);
    else
        k = static_cast<std::size_t>(std::ceil(am));
    if (k < 1) k = 1;
    if (k > m) k = m;
    return k;
}

inline void require_uniform(const DiscreteDistribution& dist, const char* op) {
    require(dist.is_uniform(),
            std::string(op) + ": perturbation is defined for uniform weights 1/m");
}

} // namespace detail

/**
 * Adversarial CVaR reweighting of a uniform m-point distribution.
 *
 * Samples strictly below the alpha-quantile value receive 1/(m*alpha),
 * samples above receive 0, and the residual mass lands on the quantile
 * sample(s). Ties at the quantile value share the residual equally, which
 * keeps the output a valid distribution and makes the resulting risk value
 * invariant under permutations of the support.
 */
inline PerturbationWeights cvar_perturbation(const DiscreteDistribution& dist, double alpha) {
    dist.validate();
    require(alpha > 0.0 && alpha <= 1.0, "cvar_perturbation: alpha must lie in (0, 1]");
    detail::require_uniform(dist, "cvar_perturbation");

    const std::size_t m = dist.size();
    const auto order = detail::ascending_order(dist);
    const std::size_t k = detail::quantile_index(alpha, m);
    const double var_value = dist.values[order[k - 1]];
    const double cap = 1.0 / (static_cast<double>(m) * alpha);

    PerturbationWeights out;
    out.probabilities.assign(m, 0.0);
    std::size_t below = 0, at = 0;
    for (std::size_t i : order) {
        if (dist.values[i] < var_value)
            ++below;
        else if (dist.values[i] == var_value)
            ++at;
    }
    double residual = 1.0 - static_cast<double>(below) * cap;
    if (residual < 0.0) residual = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (dist.values[i] < var_value)
            out.probabilities[i] = cap;
        else if (dist.values[i] == var_value)
            out.probabilities[i] = residual / static_cast<double>(at);
    }
    return out;
}

/// Wang distortion g(tau) = Phi(Phi^-1(tau) + eta).
inline double wang_distortion(double tau, double eta) {
    require(tau >= 0.0 && tau <= 1.0, "wang_distortion: tau must lie in [0, 1]");
    require(eta >= 0.0, "wang_distortion: eta must be >= 0");
    if (tau == 0.0) return 0.0;
    if (tau == 1.0) return 1.0;
    return normal_cdf(normal_quantile(tau) + eta);
}

/**
 * Wang reweighting of a uniform m-point distribution: the i-th worst sample
 * receives g(i/m) - g((i-1)/m), with the boundary cases pinned to g(1/m) and
 * 1 - g((m-1)/m) so the output sums to one exactly. Runs of equal values
 * share their combined mass equally.
 */
inline PerturbationWeights wang_perturbation(const DiscreteDistribution& dist, double eta) {
    dist.validate();
    require(eta >= 0.0, "wang_perturbation: eta must be >= 0");
    detail::require_uniform(dist, "wang_perturbation");

    const std::size_t m = dist.size();
    const auto order = detail::ascending_order(dist);
    const double md = static_cast<double>(m);

    numvec by_rank(m);
    for (std::size_t r = 0; r < m; ++r) {
        if (r == 0)
            by_rank[r] = wang_distortion(1.0 / md, eta);
        else if (r + 1 == m)
            by_rank[r] = 1.0 - wang_distortion((md - 1.0) / md, eta);
        else
            by_rank[r] = wang_distortion(static_cast<double>(r + 1) / md, eta) -
                         wang_distortion(static_cast<double>(r) / md, eta);
    }
    if (m == 1) by_rank[0] = 1.0;

    // Average the rank masses across each run of tied values.
    PerturbationWeights out;
    out.probabilities.assign(m, 0.0);
    std::size_t start = 0;
    while (start < m) {
        std::size_t stop = start + 1;
        while (stop < m && dist.values[order[stop]] == dist.values[order[start]]) ++stop;
        double mass = 0.0;
        for (std::size_t r = start; r < stop; ++r) mass += by_rank[r];
        const double share = mass / static_cast<double>(stop - start);
        for (std::size_t r = start; r < stop; ++r) out.probabilities[order[r]] = share;
        start = stop;
    }
    return out;
}

/// Identity reweighting (the risk-ablated arm).
inline PerturbationWeights neutral_perturbation(const DiscreteDistribution& dist) {
    dist.validate();
    return PerturbationWeights{dist.weights};
}

/// Dispatch on the spec. CVaR/Wang accept uniform weights only.
inline PerturbationWeights perturbation(const DiscreteDistribution& dist, const RiskSpec& spec) {
    spec.validate();
    switch (spec.kind) {
    case RiskKind::Neutral: return neutral_perturbation(dist);
    case RiskKind::CVaR: return cvar_perturbation(dist, spec.param);
    case RiskKind::Wang: return wang_perturbation(dist, spec.param);
    }
    throw invalid_input("perturbation: unknown risk kind");
}

/// rho(Z) for the discrete distribution: the xi-weighted expectation under
/// the spec's adversarial reweighting (plain expectation for Neutral).
inline double risk_value(const DiscreteDistribution& dist, const RiskSpec& spec) {
    const PerturbationWeights w = perturbation(dist, spec);
    double total = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i)
        total += w.probabilities[i] * dist.values[i];
    return total;
}

/// Mean of the ceil(alpha*n) smallest samples (empirical static CVaR).
inline double static_cvar_of_samples(const numvec& returns, double alpha) {
    require(!returns.empty(), "static_cvar_of_samples: empty sample list");
    require(alpha > 0.0 && alpha <= 1.0, "static_cvar_of_samples: alpha must lie in (0, 1]");
    numvec sorted = returns;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = detail::quantile_index(alpha, sorted.size());
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += sorted[i];
    return total / static_cast<double>(k);
}

/**
 * Closed-form CVaR of N(mu, sigma^2):
 *   mu - sigma * exp(-0.5 * Phi^-1(alpha)^2) / (alpha * sqrt(2*pi)).
 */
inline double gaussian_cvar(double mu, double sigma, double alpha) {
    require(sigma >= 0.0, "gaussian_cvar: sigma must be >= 0");
    require(alpha > 0.0 && alpha < 1.0, "gaussian_cvar: alpha must lie in (0, 1)");
    if (sigma == 0.0) return mu;
    const double q = normal_quantile(alpha);
    return mu - sigma * std::exp(-0.5 * q * q) / (alpha * sqrt_two_pi);
}

} // namespace riskrl::risk
