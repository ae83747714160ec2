#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "riskrl/common.hpp"
#include "riskrl/math.hpp"

namespace riskrl {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic child-stream seed: independent of any engine state, so
/// per-member / per-episode streams do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return splitmix64(splitmix64(base) ^ splitmix64(~salt));
}

/**
 * Random source used throughout: mt19937_64 with explicit, stateless
 * transformations on top (Box-Muller for normals, no cached spare), so the
 * engine state is the entire rng state and serializes exactly.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open() { return 1.0 - uniform(); }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int below(int n) {
        require(n > 0, "Rng::below: n must be positive");
        const int k = static_cast<int>(uniform() * n);
        return k < n ? k : n - 1;
    }

    /// Standard normal draw (Box-Muller, cosine branch).
    double normal() {
        const double r = std::sqrt(-2.0 * std::log(uniform_open()));
        return r * std::cos(two_pi * uniform());
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    std::string save_state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void load_state(const std::string& text) {
        std::istringstream is(text);
        is >> eng_;
        ensure(!is.fail(), "Rng::load_state: malformed engine state");
    }

private:
    std::mt19937_64 eng_;
};

/// Categorical draw from (possibly unnormalized within 1e-9) probabilities.
inline std::size_t categorical(const numvec& probs, Rng& rng) {
    require(!probs.empty(), "categorical: empty probability vector");
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return i;
    }
    // u landed in the rounding slack past the last cumulative step.
    std::size_t i = probs.size();
    while (i > 0) {
        --i;
        if (probs[i] > 0.0) return i;
    }
    return probs.size() - 1;
}

} // namespace riskrl
