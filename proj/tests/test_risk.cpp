#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskrl/risk.hpp"
#include "riskrl/rng.hpp"

using namespace riskrl;
using namespace riskrl::risk;
using Catch::Approx;

namespace {

// Independent CVaR oracle via the Rockafellar-Uryasev variational form:
// CVaR_a(Z) = max_t [ t - E[(t - Z)_+] / a ], maximum attained at an atom.
double cvar_ru(const numvec& values, const numvec& probs, double alpha) {
    double best = -std::numeric_limits<double>::infinity();
    for (double t : values) {
        double shortfall = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            shortfall += probs[i] * std::max(t - values[i], 0.0);
        best = std::max(best, t - shortfall / alpha);
    }
    return best;
}

numvec random_values(Rng& rng, std::size_t m, double lo = -10.0, double hi = 10.0) {
    numvec v(m);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

void check_valid_weights(const PerturbationWeights& w) {
    double total = 0.0;
    for (double p : w.probabilities) {
        REQUIRE(p >= -1e-12);
        total += p;
    }
    REQUIRE(total == Approx(1.0).margin(1e-9));
}

} // namespace

TEST_CASE("cvar_perturbation on the worked example") {
    auto d = DiscreteDistribution::uniform({1, 2, 3, 4});
    auto w = cvar_perturbation(d, 0.5);
    REQUIRE(w.probabilities == numvec{0.5, 0.5, 0.0, 0.0});
}

TEST_CASE("cvar_perturbation at alpha=1 is uniform") {
    Rng rng(1);
    auto d = DiscreteDistribution::uniform(random_values(rng, 7));
    auto w = cvar_perturbation(d, 1.0);
    for (double p : w.probabilities) CHECK(p == Approx(1.0 / 7).margin(1e-12));
}

TEST_CASE("cvar_perturbation concentrates on the worst sample when m*alpha <= 1") {
    Rng rng(2);
    numvec vals = random_values(rng, 10);
    auto d = DiscreteDistribution::uniform(vals);
    auto w = cvar_perturbation(d, 0.1);
    const auto worst = std::min_element(vals.begin(), vals.end()) - vals.begin();
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(w.probabilities[i] == Approx(i == static_cast<std::size_t>(worst) ? 1.0 : 0.0));
}

TEST_CASE("cvar_perturbation splits mass across ties at the quantile") {
    auto d1 = DiscreteDistribution::uniform({1, 1, 2});
    auto w1 = cvar_perturbation(d1, 0.5);
    CHECK(w1.probabilities[0] == Approx(0.5));
    CHECK(w1.probabilities[1] == Approx(0.5));
    CHECK(w1.probabilities[2] == Approx(0.0));

    auto d2 = DiscreteDistribution::uniform({1, 2, 2, 3});
    auto w2 = cvar_perturbation(d2, 0.5);
    CHECK(w2.probabilities[0] == Approx(0.5));
    CHECK(w2.probabilities[1] == Approx(0.25));
    CHECK(w2.probabilities[2] == Approx(0.25));
    CHECK(w2.probabilities[3] == Approx(0.0));
}

TEST_CASE("cvar_perturbation rejects bad input") {
    auto d = DiscreteDistribution::uniform({1, 2});
    CHECK_THROWS_AS(cvar_perturbation(d, 0.0), invalid_input);
    CHECK_THROWS_AS(cvar_perturbation(d, 1.5), invalid_input);
    DiscreteDistribution empty;
    CHECK_THROWS_AS(cvar_perturbation(empty, 0.5), invalid_input);
    DiscreteDistribution nonuniform;
    nonuniform.values = {1, 2};
    nonuniform.payloads = {0, 1};
    nonuniform.weights = {0.3, 0.7};
    CHECK_THROWS_AS(cvar_perturbation(nonuniform, 0.5), invalid_input);
}

TEST_CASE("risk envelope holds for random uniform distributions") {
    Rng rng(3);
    for (int it = 0; it < 200; ++it) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.below(49));
        auto d = DiscreteDistribution::uniform(random_values(rng, m));
        for (double alpha : {0.05, 0.1, 0.5, 1.0}) {
            auto w = cvar_perturbation(d, alpha);
            check_valid_weights(w);
            const double cap = 1.0 / (static_cast<double>(m) * alpha);
            for (double p : w.probabilities) REQUIRE(p <= cap + 1e-9);
        }
        for (double eta : {0.0, 0.1, 0.5, 0.75, 10.0}) {
            check_valid_weights(wang_perturbation(d, eta));
        }
    }
}

TEST_CASE("wang_distortion basics") {
    CHECK(wang_distortion(0.5, 0.0) == Approx(0.5).margin(1e-12));
    CHECK(wang_distortion(0.5, 0.5) == Approx(0.6914624612740131).margin(1e-9));
    CHECK(wang_distortion(0.0, 3.0) == 0.0);
    CHECK(wang_distortion(1.0, 3.0) == 1.0);
    CHECK_THROWS_AS(wang_distortion(-0.1, 1.0), invalid_input);
    CHECK_THROWS_AS(wang_distortion(1.1, 1.0), invalid_input);
    CHECK_THROWS_AS(wang_distortion(0.5, -1.0), invalid_input);

    double prev = 0.0;
    for (double tau = 0.0; tau <= 1.0; tau += 0.01) {
        const double g = wang_distortion(tau, 0.75);
        REQUIRE(g >= prev - 1e-12);
        prev = g;
    }
}

TEST_CASE("wang_perturbation examples") {
    auto d = DiscreteDistribution::uniform({5.0, 1.0});
    auto w0 = wang_perturbation(d, 0.0);
    CHECK(w0.probabilities[0] == Approx(0.5).margin(1e-9));
    CHECK(w0.probabilities[1] == Approx(0.5).margin(1e-9));

    auto w = wang_perturbation(d, 0.5);
    CHECK(w.probabilities[1] == Approx(0.6914624612740131).margin(1e-6)); // worst
    CHECK(w.probabilities[0] == Approx(0.3085375387259869).margin(1e-6)); // best

    auto d4 = DiscreteDistribution::uniform({0.0, 1.0, 2.0, 3.0});
    auto wbig = wang_perturbation(d4, 10.0);
    CHECK(wbig.probabilities[0] >= 1.0 - 1e-9);
    for (int i = 1; i < 4; ++i) CHECK(wbig.probabilities[i] <= 1e-9);

    CHECK_THROWS_AS(wang_perturbation(d, -0.1), invalid_input);
}

TEST_CASE("wang_perturbation approaches uniform as eta -> 0") {
    Rng rng(4);
    auto d = DiscreteDistribution::uniform(random_values(rng, 10));
    auto w = wang_perturbation(d, 1e-8);
    for (double p : w.probabilities) REQUIRE(std::abs(p - 0.1) <= 1e-6);
}

TEST_CASE("wang_perturbation favours worse samples cumulatively for eta > 0") {
    Rng rng(5);
    numvec vals = random_values(rng, 12);
    auto d = DiscreteDistribution::uniform(vals);
    auto w = wang_perturbation(d, 0.75);

    std::vector<std::size_t> order(vals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](auto i, auto j) { return vals[i] < vals[j]; });
    double cum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        cum += w.probabilities[order[r]];
        REQUIRE(cum >= static_cast<double>(r + 1) / 12.0 - 1e-9);
    }
    CHECK(w.probabilities[order[0]] >= 1.0 / 12.0);
}

TEST_CASE("wang_perturbation spreads ties evenly") {
    auto d = DiscreteDistribution::uniform({2.0, 2.0, 2.0});
    auto w = wang_perturbation(d, 0.75);
    for (double p : w.probabilities) CHECK(p == Approx(1.0 / 3).margin(1e-12));
}

TEST_CASE("neutral_perturbation is the identity") {
    auto d = DiscreteDistribution::uniform(numvec(10, 1.0));
    auto w = neutral_perturbation(d);
    for (double p : w.probabilities) CHECK(p == Approx(0.1));

    DiscreteDistribution biased;
    biased.values = {1, 2};
    biased.payloads = {0, 1};
    biased.weights = {0.3, 0.7};
    auto wb = neutral_perturbation(biased);
    CHECK(wb.probabilities == numvec{0.3, 0.7});

    DiscreteDistribution empty;
    CHECK_THROWS_AS(neutral_perturbation(empty), invalid_input);
}

TEST_CASE("risk_value worked examples") {
    auto d = DiscreteDistribution::uniform({1, 2, 3, 4});
    CHECK(risk_value(d, RiskSpec::cvar(0.5)) == Approx(1.5));
    CHECK(risk_value(d, RiskSpec::neutral()) == Approx(2.5));

    DiscreteDistribution biased;
    biased.values = {1, 5};
    biased.payloads = {0, 1};
    biased.weights = {0.25, 0.75};
    CHECK(risk_value(biased, RiskSpec::neutral()) == Approx(4.0));

    auto point = DiscreteDistribution::uniform({3.25});
    for (auto spec : {RiskSpec::neutral(), RiskSpec::cvar(0.3), RiskSpec::wang(0.75)})
        CHECK(risk_value(point, spec) == Approx(3.25));
}

TEST_CASE("risk_value agrees with the Rockafellar-Uryasev oracle") {
    Rng rng(6);
    for (int it = 0; it < 50; ++it) {
        const std::size_t m = 2 + static_cast<std::size_t>(rng.below(30));
        numvec vals = random_values(rng, m);
        auto d = DiscreteDistribution::uniform(vals);
        for (double alpha : {0.1, 0.3, 0.5, 0.9, 1.0}) {
            const double via_envelope = risk_value(d, RiskSpec::cvar(alpha));
            const double via_ru = cvar_ru(vals, d.weights, alpha);
            REQUIRE(via_envelope == Approx(via_ru).margin(1e-9));
        }
    }
}

TEST_CASE("risk dominance and monotonicity in alpha") {
    Rng rng(7);
    for (int it = 0; it < 30; ++it) {
        auto d = DiscreteDistribution::uniform(random_values(rng, 15));
        const double neutral = risk_value(d, RiskSpec::neutral());
        double prev = -std::numeric_limits<double>::infinity();
        for (double alpha : {0.05, 0.1, 0.3, 0.5, 0.8, 1.0}) {
            const double v = risk_value(d, RiskSpec::cvar(alpha));
            REQUIRE(v <= neutral + 1e-9);
            REQUIRE(v >= prev - 1e-9);
            prev = v;
        }
        REQUIRE(risk_value(d, RiskSpec::wang(0.5)) <= neutral + 1e-9);
    }

    auto flat = DiscreteDistribution::uniform(numvec(8, 2.5));
    CHECK(risk_value(flat, RiskSpec::cvar(0.2)) == Approx(2.5));
}

TEST_CASE("risk_value coherence spot checks") {
    Rng rng(8);
    numvec vals = random_values(rng, 9);
    auto d = DiscreteDistribution::uniform(vals);
    for (auto spec : {RiskSpec::cvar(0.4), RiskSpec::wang(0.6)}) {
        const double base = risk_value(d, spec);

        numvec scaled = vals;
        for (auto& v : scaled) v *= 3.5;
        CHECK(risk_value(DiscreteDistribution::uniform(scaled), spec) ==
              Approx(3.5 * base).margin(1e-9));

        numvec shifted = vals;
        for (auto& v : shifted) v += 1.75;
        CHECK(risk_value(DiscreteDistribution::uniform(shifted), spec) ==
              Approx(base + 1.75).margin(1e-9));
    }
}

TEST_CASE("risk_value is invariant to support permutations") {
    Rng rng(9);
    numvec vals = random_values(rng, 11);
    vals[3] = vals[7]; // force a tie
    auto d = DiscreteDistribution::uniform(vals);

    DiscreteDistribution shuffled = d;
    std::vector<std::size_t> perm(vals.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(static_cast<int>(i))]);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.values[i] = d.values[perm[i]];
        shuffled.payloads[i] = d.payloads[perm[i]];
    }

    for (auto spec : {RiskSpec::neutral(), RiskSpec::cvar(0.35), RiskSpec::wang(0.75)})
        REQUIRE(risk_value(shuffled, spec) == Approx(risk_value(d, spec)).margin(1e-9));
}

TEST_CASE("risk_value rejects non-uniform weights for CVaR and Wang") {
    DiscreteDistribution biased;
    biased.values = {1, 2};
    biased.payloads = {0, 1};
    biased.weights = {0.3, 0.7};
    CHECK_THROWS_AS(risk_value(biased, RiskSpec::cvar(0.5)), invalid_input);
    CHECK_THROWS_AS(risk_value(biased, RiskSpec::wang(0.5)), invalid_input);
}

TEST_CASE("static_cvar_of_samples") {
    numvec zero_to_nine{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(static_cvar_of_samples(zero_to_nine, 0.1) == Approx(0.0));
    CHECK(static_cvar_of_samples(zero_to_nine, 1.0) == Approx(4.5));
    CHECK(static_cvar_of_samples(numvec(5, 3.0), 0.4) == Approx(3.0));
    CHECK(static_cvar_of_samples({4, 1, 3, 2}, 0.5) == Approx(1.5));
    CHECK_THROWS_AS(static_cvar_of_samples({}, 0.5), invalid_input);
    CHECK_THROWS_AS(static_cvar_of_samples({1.0}, 0.0), invalid_input);
}

TEST_CASE("gaussian_cvar closed form") {
    CHECK(gaussian_cvar(0, 1, 0.5) == Approx(-0.7978845608028654).margin(1e-9));
    CHECK(gaussian_cvar(2.5, 0, 0.3) == Approx(2.5));
    CHECK_THROWS_AS(gaussian_cvar(0, 1, 0.0), invalid_input);
    CHECK_THROWS_AS(gaussian_cvar(0, 1, 1.0), invalid_input);
    CHECK_THROWS_AS(gaussian_cvar(0, -1, 0.5), invalid_input);

    double prev = gaussian_cvar(1.0, 0.0, 0.25);
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        const double v = gaussian_cvar(1.0, sigma, 0.25);
        REQUIRE(v < prev);
        prev = v;
    }
}

TEST_CASE("gaussian_cvar matches a Monte-Carlo oracle") {
    Rng rng(10);
    const double mu = 5.0, sigma = 2.0, alpha = 0.1;
    const int n = 1000000;
    numvec draws(n);
    for (auto& x : draws) x = rng.normal(mu, sigma);
    const double mc = static_cvar_of_samples(draws, alpha);
    CHECK(gaussian_cvar(mu, sigma, alpha) == Approx(mc).margin(1e-2));
}

TEST_CASE("SAA risk value converges to the Gaussian closed form") {
    const double mu = 1.0, sigma = 2.0, alpha = 0.1;
    const double exact = gaussian_cvar(mu, sigma, alpha);
    const int m = 100000;
    double total_abs_err = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(derive_seed(11, seed));
        numvec vals(m);
        for (auto& v : vals) v = rng.normal(mu, sigma);
        auto d = DiscreteDistribution::uniform(std::move(vals));
        total_abs_err += std::abs(risk_value(d, RiskSpec::cvar(alpha)) - exact);
    }
    CHECK(total_abs_err / 20.0 < 0.02 * sigma);
}
