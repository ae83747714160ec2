#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "riskrl/common.hpp"
#include "riskrl/risk.hpp"

namespace riskrl::tabular {

using risk::RiskKind;
using risk::RiskSpec;

/// Finite MDP (S, A, T, R, s0, gamma) with dense transition rows.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    numvec transition; // [s][a][s']
    numvec reward;     // [s][a]
    int initial_state = 0;
    double discount = 0.9;

    double t(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& t(int s, int a, int s2) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
    double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    double max_abs_reward() const {
        double m = 0.0;
        for (double x : reward) m = std::max(m, std::abs(x));
        return m;
    }

    void validate() const {
        require(n_states >= 1 && n_actions >= 1, "TabularMDP: empty state or action space");
        require(transition.size() ==
                    static_cast<std::size_t>(n_states) * n_actions * n_states,
                "TabularMDP: transition tensor shape mismatch");
        require(reward.size() == static_cast<std::size_t>(n_states) * n_actions,
                "TabularMDP: reward matrix shape mismatch");
        require(initial_state >= 0 && initial_state < n_states, "TabularMDP: bad initial state");
        require(discount > 0.0 && discount < 1.0, "TabularMDP: discount must lie in (0, 1)");
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) {
                double sum = 0.0;
                for (int s2 = 0; s2 < n_states; ++s2) {
                    require(t(s, a, s2) >= -1e-12, "TabularMDP: negative transition probability");
                    sum += t(s, a, s2);
                }
                require(std::abs(sum - 1.0) <= 1e-9, "TabularMDP: transition row must sum to 1");
            }
    }
};

struct ValueTable {
    numvec values;

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Stochastic Markov policy; rows over actions sum to one.
struct PolicyTable {
    numvec action_probs; // [s][a]
    int n_actions = 0;

    double p(int s, int a) const {
        return action_probs[static_cast<std::size_t>(s) * n_actions + a];
    }
    double& p(int s, int a) {
        return action_probs[static_cast<std::size_t>(s) * n_actions + a];
    }

    static PolicyTable deterministic(const std::vector<int>& actions, int n_actions) {
        PolicyTable pi;
        pi.n_actions = n_actions;
        pi.action_probs.assign(actions.size() * n_actions, 0.0);
        for (std::size_t s = 0; s < actions.size(); ++s) pi.p(static_cast<int>(s), actions[s]) = 1.0;
        return pi;
    }

    void validate(int n_states) const {
        require(n_actions >= 1 &&
                    action_probs.size() == static_cast<std::size_t>(n_states) * n_actions,
                "PolicyTable: shape mismatch");
        for (int s = 0; s < n_states; ++s) {
            double sum = 0.0;
            for (int a = 0; a < n_actions; ++a) {
                require(p(s, a) >= -1e-12, "PolicyTable: negative action probability");
                sum += p(s, a);
            }
            require(std::abs(sum - 1.0) <= 1e-9, "PolicyTable: action row must sum to 1");
        }
    }
};

namespace detail {

/**
 * Exact solution of the inner minimisation min_{xi in B_rho(p)} sum_i p_i xi_i v_i
 * for a discrete distribution with arbitrary (non-uniform) probabilities.
 *
 * CVaR: the envelope {0 <= xi <= 1/alpha, sum xi*p = 1} is solved by greedy
 * mass-filling from the worst value, each atom capped at p_i/alpha.
 * Wang: increments of the distorted CDF g on the value-sorted atoms.
 */
inline double risk_weighted_mean(const numvec& values, const numvec& probs,
                                 const RiskSpec& spec) {
    spec.validate();
    if (spec.kind == RiskKind::Neutral)
        return std::inner_product(values.begin(), values.end(), probs.begin(), 0.0);

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (values[i] != values[j]) return values[i] < values[j];
        return i < j;
    });

    double total = 0.0;
    if (spec.kind == RiskKind::CVaR) {
        const double alpha = spec.param;
        double remaining = 1.0;
        for (std::size_t i : order) {
            if (remaining <= 0.0) break;
            const double q = std::min(probs[i] / alpha, remaining);
            total += q * values[i];
            remaining -= q;
        }
    } else { // Wang
        double cum = 0.0, g_prev = 0.0;
        for (std::size_t idx = 0; idx < order.size(); ++idx) {
            const std::size_t i = order[idx];
            cum += probs[i];
            const double g_cur = (idx + 1 == order.size())
                                     ? 1.0
                                     : risk::wang_distortion(std::min(cum, 1.0), spec.param);
            total += (g_cur - g_prev) * values[i];
            g_prev = g_cur;
        }
    }
    return total;
}

/// One sweep of the risk-sensitive Bellman evaluation operator (Eq. over a
/// stochastic policy: per-action risk over successors, expectation over
/// actions outside the risk measure).
inline void evaluation_sweep(const TabularMDP& mdp, const PolicyTable& policy,
                             const RiskSpec& spec, const numvec& v, numvec& out,
                             numvec& row_values, numvec& row_probs) {
    for (int s = 0; s < mdp.n_states; ++s) {
        double total = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double pa = policy.p(s, a);
            if (pa == 0.0) continue;
            row_values.clear();
            row_probs.clear();
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                const double p = mdp.t(s, a, s2);
                if (p > 0.0) {
                    row_values.push_back(v[s2]);
                    row_probs.push_back(p);
                }
            }
            total += pa * (mdp.r(s, a) +
                           mdp.discount * risk_weighted_mean(row_values, row_probs, spec));
        }
        out[s] = total;
    }
}

} // namespace detail

/**
 * Fixed point of the risk-sensitive Bellman evaluation equation to sup-norm
 * tolerance. For the Neutral spec this is standard policy evaluation.
 * Throws on non-convergence within max_iterations.
 */
inline ValueTable risk_policy_evaluation(const TabularMDP& mdp, const PolicyTable& policy,
                                         const RiskSpec& spec, double tol,
                                         long max_iterations = 100000) {
    mdp.validate();
    policy.validate(mdp.n_states);
    spec.validate();
    require(tol > 0.0, "risk_policy_evaluation: tol must be positive");

    numvec v(mdp.n_states, 0.0), next(mdp.n_states, 0.0);
    numvec row_values, row_probs;
    for (long it = 0; it < max_iterations; ++it) {
        detail::evaluation_sweep(mdp, policy, spec, v, next, row_values, row_probs);
        double delta = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) delta = std::max(delta, std::abs(next[s] - v[s]));
        v.swap(next);
        if (delta <= tol) return ValueTable{std::move(v)};
    }
    throw runtime_failure("risk_policy_evaluation: no convergence within iteration cap");
}

/**
 * Risk-sensitive value iteration. Returns the optimal value table and a
 * deterministic greedy policy (ties resolved to the lowest action index).
 */
inline std::pair<ValueTable, PolicyTable> risk_value_iteration(const TabularMDP& mdp,
                                                               const RiskSpec& spec, double tol,
                                                               long max_iterations = 100000) {
    mdp.validate();
    spec.validate();
    require(tol > 0.0, "risk_value_iteration: tol must be positive");

    numvec v(mdp.n_states, 0.0), next(mdp.n_states, 0.0);
    numvec row_values, row_probs;
    std::vector<int> greedy(mdp.n_states, 0);

    auto sweep = [&]() {
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                row_values.clear();
                row_probs.clear();
                for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                    const double p = mdp.t(s, a, s2);
                    if (p > 0.0) {
                        row_values.push_back(v[s2]);
                        row_probs.push_back(p);
                    }
                }
                const double q =
                    mdp.r(s, a) +
                    mdp.discount * detail::risk_weighted_mean(row_values, row_probs, spec);
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            next[s] = best;
            greedy[s] = best_a;
        }
    };

    for (long it = 0; it < max_iterations; ++it) {
        sweep();
        double delta = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) delta = std::max(delta, std::abs(next[s] - v[s]));
        v.swap(next);
        if (delta <= tol)
            return {ValueTable{std::move(v)}, PolicyTable::deterministic(greedy, mdp.n_actions)};
    }
    throw runtime_failure("risk_value_iteration: no convergence within iteration cap");
}

namespace detail {

/// Self-contained one-step risk used only by the brute-force oracle; kept
/// independent of risk_weighted_mean so the oracle exercises a second route.
/// CVaR goes through the Rockafellar-Uryasev variational form, Wang through
/// the distorted-CDF definition on plain sorted pairs.
inline double oracle_onestep_risk(const std::vector<std::pair<double, double>>& value_prob,
                                  const RiskSpec& spec) {
    if (spec.kind == RiskKind::Neutral) {
        double total = 0.0;
        for (const auto& [v, p] : value_prob) total += v * p;
        return total;
    }
    if (spec.kind == RiskKind::CVaR) {
        const double alpha = spec.param;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [t, _] : value_prob) {
            double shortfall = 0.0;
            for (const auto& [v, p] : value_prob) shortfall += p * std::max(t - v, 0.0);
            best = std::max(best, t - shortfall / alpha);
        }
        return best;
    }
    auto sorted = value_prob;
    std::sort(sorted.begin(), sorted.end());
    double cum = 0.0, g_prev = 0.0, total = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        cum += sorted[i].second;
        const double g_cur = (i + 1 == sorted.size())
                                 ? 1.0
                                 : risk::wang_distortion(std::min(cum, 1.0), spec.param);
        total += (g_cur - g_prev) * sorted[i].first;
        g_prev = g_cur;
    }
    return total;
}

} // namespace detail

/**
 * Finite-horizon dynamic Markov risk from the initial state by direct
 * recursion over depth, truncating the tail beyond the horizon at zero.
 * Serves as the independent oracle for risk_policy_evaluation; the gap to
 * the infinite-horizon fixed point is at most gamma^h * R_max / (1 - gamma).
 */
inline double dynamic_risk_bruteforce(const TabularMDP& mdp, const PolicyTable& policy,
                                      const RiskSpec& spec, int horizon) {
    mdp.validate();
    policy.validate(mdp.n_states);
    spec.validate();
    require(horizon >= 1, "dynamic_risk_bruteforce: horizon must be >= 1");
    require(horizon <= 64 && mdp.n_states <= 64,
            "dynamic_risk_bruteforce: recursion budget exceeded");

    // depth d = steps remaining; values computed bottom-up over the full
    // successor width at every level.
    numvec prev(mdp.n_states, 0.0), cur(mdp.n_states, 0.0);
    std::vector<std::pair<double, double>> row;
    for (int d = 1; d <= horizon; ++d) {
        for (int s = 0; s < mdp.n_states; ++s) {
            double total = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double pa = policy.p(s, a);
                if (pa == 0.0) continue;
                row.clear();
                for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                    const double p = mdp.t(s, a, s2);
                    if (p > 0.0) row.emplace_back(prev[s2], p);
                }
                total += pa * (mdp.r(s, a) +
                               mdp.discount * detail::oracle_onestep_risk(row, spec));
            }
            cur[s] = total;
        }
        prev.swap(cur);
    }
    return prev[mdp.initial_state];
}

/// Uniform-weight aggregation of an ensemble of MDPs into the single
/// expected MDP (elementwise mean of transitions and rewards).
inline TabularMDP bayes_average_mdp(const std::vector<TabularMDP>& models) {
    require(!models.empty(), "bayes_average_mdp: empty model list");
    const TabularMDP& first = models.front();
    first.validate();
    for (const auto& m : models) {
        require(m.n_states == first.n_states && m.n_actions == first.n_actions,
                "bayes_average_mdp: mismatched shapes");
        require(m.initial_state == first.initial_state && m.discount == first.discount,
                "bayes_average_mdp: mismatched initial state or discount");
    }
    TabularMDP avg = first;
    const double w = 1.0 / static_cast<double>(models.size());
    std::fill(avg.transition.begin(), avg.transition.end(), 0.0);
    std::fill(avg.reward.begin(), avg.reward.end(), 0.0);
    for (const auto& m : models) {
        for (std::size_t i = 0; i < avg.transition.size(); ++i)
            avg.transition[i] += w * m.transition[i];
        for (std::size_t i = 0; i < avg.reward.size(); ++i) avg.reward[i] += w * m.reward[i];
    }
    avg.validate();
    return avg;
}

} // namespace riskrl::tabular
