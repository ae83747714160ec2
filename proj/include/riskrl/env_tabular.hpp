#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskrl/rng.hpp"
#include "riskrl/tabular.hpp"

namespace riskrl::env {

/**
 * Seeded random finite MDP for oracle tests: Dirichlet(1,...,1) transition
 * rows restricted to a sparsity-controlled successor set, Uniform(0,1)
 * rewards. sparsity = 0 gives dense rows, sparsity = 1 deterministic ones.
 */
inline tabular::TabularMDP random_tabular_mdp(int n_states, int n_actions, double sparsity,
                                              std::uint64_t seed, double discount = 0.9) {
    require(n_states >= 1 && n_actions >= 1, "random_tabular_mdp: need >= 1 state and action");
    require(sparsity >= 0.0 && sparsity <= 1.0, "random_tabular_mdp: sparsity must lie in [0,1]");

    Rng rng(derive_seed(seed, 0x7ab));
    tabular::TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.discount = discount;
    mdp.initial_state = 0;
    mdp.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    mdp.reward.resize(static_cast<std::size_t>(n_states) * n_actions);

    const int support = std::max(1, static_cast<int>(std::llround((1.0 - sparsity) * n_states)));
    std::vector<int> cols(n_states);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            std::iota(cols.begin(), cols.end(), 0);
            for (int i = n_states; i > 1; --i) std::swap(cols[i - 1], cols[rng.below(i)]);
            double total = 0.0;
            numvec mass(support);
            for (int j = 0; j < support; ++j) {
                mass[j] = -std::log(rng.uniform_open());
                total += mass[j];
            }
            for (int j = 0; j < support; ++j) mdp.t(s, a, cols[j]) = mass[j] / total;
            mdp.r(s, a) = rng.uniform();
        }
    mdp.validate();
    return mdp;
}

/// Seeded random stochastic policy with Dirichlet(1,...,1) action rows.
inline tabular::PolicyTable random_policy(int n_states, int n_actions, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x90c));
    tabular::PolicyTable pi;
    pi.n_actions = n_actions;
    pi.action_probs.resize(static_cast<std::size_t>(n_states) * n_actions);
    for (int s = 0; s < n_states; ++s) {
        double total = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            pi.p(s, a) = -std::log(rng.uniform_open());
            total += pi.p(s, a);
        }
        for (int a = 0; a < n_actions; ++a) pi.p(s, a) /= total;
    }
    pi.validate(n_states);
    return pi;
}

} // namespace riskrl::env
