#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "riskrl/dataset.hpp"
#include "riskrl/rng.hpp"

using namespace riskrl;
using Catch::Approx;

namespace {

OfflineDataset random_dataset(int n, std::uint64_t seed) {
    Rng rng(seed);
    OfflineDataset d;
    d.state_dim = 3;
    d.action_dim = 1;
    d.env_id = "test";
    d.seed = seed;
    d.records.resize(n);
    for (auto& rec : d.records) {
        rec.state = VectorXd::NullaryExpr(3, [&](Eigen::Index) { return rng.normal(2.0, 5.0); });
        rec.action = VectorXd::NullaryExpr(1, [&](Eigen::Index) { return rng.uniform(-1, 1); });
        rec.reward = rng.normal(0.0, 3.0);
        rec.next_state = VectorXd::NullaryExpr(3, [&](Eigen::Index) { return rng.normal(); });
        rec.terminal = rng.uniform() < 0.1;
    }
    return d;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("normalize_inputs standardizes and round trips") {
    auto d = random_dataset(500, 31);
    auto norm = normalize_inputs(d);

    MatrixXd Z = norm.apply(d.inputs());
    for (int j = 0; j < Z.cols(); ++j) {
        CHECK(Z.col(j).mean() == Approx(0.0).margin(1e-9));
        const double sd = std::sqrt(Z.col(j).array().square().mean());
        CHECK(sd == Approx(1.0).margin(1e-9));
    }

    MatrixXd back = norm.invert(Z);
    CHECK((back - d.inputs()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normalize_inputs on standardized data is near identity") {
    Rng rng(32);
    OfflineDataset d;
    d.state_dim = 2;
    d.action_dim = 1;
    const int n = 20000;
    d.records.resize(n);
    for (auto& rec : d.records) {
        rec.state = VectorXd::NullaryExpr(2, [&](Eigen::Index) { return rng.normal(); });
        rec.action = VectorXd::NullaryExpr(1, [&](Eigen::Index) { return rng.normal(); });
        rec.reward = 0;
        rec.next_state = rec.state;
        rec.terminal = false;
    }
    auto norm = normalize_inputs(d);
    for (int j = 0; j < 3; ++j) {
        CHECK(norm.mean(j) == Approx(0.0).margin(0.03));
        CHECK(norm.scale(j) == Approx(1.0).margin(0.03));
    }
}

TEST_CASE("constant dimensions pass through unscaled") {
    auto d = random_dataset(100, 33);
    for (auto& rec : d.records) rec.state(1) = 7.5;
    d.invalidate_cache();
    auto norm = normalize_inputs(d);
    CHECK(norm.scale(1) == 1.0);
    MatrixXd Z = norm.apply(d.inputs());
    CHECK(Z.col(1).cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-12));
}

TEST_CASE("text and binary round trips are lossless") {
    auto d = random_dataset(200, 34);
    const auto txt = temp_file("riskrl_ds_test.txt");
    const auto bin = temp_file("riskrl_ds_test.bin");

    d.save_text(txt.string());
    auto dt = OfflineDataset::load(txt.string());
    d.save_binary(bin.string());
    auto db = OfflineDataset::load(bin.string());

    REQUIRE(dt.size() == d.size());
    REQUIRE(db.size() == d.size());
    CHECK(dt.env_id == d.env_id);
    CHECK(dt.seed == d.seed);
    for (std::size_t i = 0; i < d.size(); ++i) {
        // %.17g round-trips IEEE doubles exactly; binary is bit-identical.
        REQUIRE((dt.records[i].state - d.records[i].state).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(dt.records[i].reward == d.records[i].reward);
        REQUIRE((db.records[i].next_state - d.records[i].next_state).cwiseAbs().maxCoeff() ==
                0.0);
        REQUIRE(dt.records[i].terminal == d.records[i].terminal);
        REQUIRE(db.records[i].terminal == d.records[i].terminal);
    }
    std::filesystem::remove(txt);
    std::filesystem::remove(bin);
}

TEST_CASE("load rejects clutter") {
    const auto path = temp_file("riskrl_ds_bad.txt");
    {
        std::ofstream os(path);
        os << "not-a-dataset 1 2 3\n";
    }
    CHECK_THROWS_AS(OfflineDataset::load(path.string()), runtime_failure);
    CHECK_THROWS_AS(OfflineDataset::load("/nonexistent/nowhere.txt"), runtime_failure);
    std::filesystem::remove(path);
}

TEST_CASE("validate catches inconsistent dimensions") {
    auto d = random_dataset(10, 35);
    d.records[4].action = VectorXd::Zero(2);
    CHECK_THROWS_AS(d.validate(), invalid_input);
}
