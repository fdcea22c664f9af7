#include "calspread/spa.hpp"

#include "spa_checks.hpp"

#include <gtest/gtest.h>

using namespace calspread;
using namespace testsupport;

namespace {

std::vector<double> noise(std::uint64_t seed, std::size_t n, double shift = 0.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.normal() + shift;
    }
    return v;
}

} // namespace

TEST(Spa, DominantBenchmarkIsNotRejected) {
    std::map<std::string, std::vector<double>> l;
    l["bench"] = noise(1, 300);
    l["a"] = l["bench"];
    l["b"] = l["bench"];
    for (std::size_t t = 0; t < 300; ++t) {
        l["a"][t] += 1.0 + 0.1 * std::abs(l["bench"][t]);
        l["b"][t] += 0.5 + 0.2 * std::abs(l["bench"][t]);
    }
    const auto r = spa_test(l, "bench", {500, 10.0, 3});
    EXPECT_GT(r.p_consistent, 0.9);
    EXPECT_GT(r.p_lower, 0.9);
    EXPECT_LE(r.p_lower, r.p_consistent);
    EXPECT_LE(r.p_consistent, r.p_upper);
    EXPECT_LT(r.models.at("a").mean_diff, 0.0);
}

TEST(Spa, IdenticalLossesAreDegenerate) {
    const auto v = noise(2, 100);
    std::map<std::string, std::vector<double>> l{{"bench", v}, {"a", v}, {"b", v}};
    try {
        spa_test(l, "bench");
        FAIL() << "expected DegenerateVariance";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DegenerateVariance);
    }
}

TEST(Spa, OneDegenerateRivalIsExcluded) {
    const auto v = noise(4, 200);
    std::map<std::string, std::vector<double>> l{{"bench", v}, {"same", v}, {"other", noise(5, 200)}};
    const auto r = spa_test(l, "bench", {200, 5.0, 1});
    EXPECT_TRUE(r.models.at("same").degenerate);
    EXPECT_FALSE(r.models.at("other").degenerate);
}

TEST(Spa, SuperiorRivalRejectsBenchmark) {
    // Rival better by 5 standard errors of the differential on one draw.
    const std::size_t n = 400;
    std::map<std::string, std::vector<double>> l;
    l["bench"] = noise(6, n);
    l["a"] = noise(7, n, -5.0 * std::sqrt(2.0 / n));
    l["b"] = noise(8, n);
    const auto r = spa_test(l, "bench", {1000, 10.0, 9});
    EXPECT_LT(r.p_consistent, 0.05);
    EXPECT_GT(r.models.at("a").t_stat, 3.0);
    EXPECT_LT(r.models.at("a").p_value, 0.05);
}

TEST(Spa, Deterministic) {
    std::map<std::string, std::vector<double>> l{{"bench", noise(1, 100)}, {"a", noise(2, 100)}};
    const auto a = spa_test(l, "bench", {300, 4.0, 11});
    const auto b = spa_test(l, "bench", {300, 4.0, 11});
    EXPECT_EQ(a.p_consistent, b.p_consistent);
    EXPECT_EQ(a.statistic, b.statistic);
}

TEST(Spa, InputValidation) {
    std::map<std::string, std::vector<double>> l{{"bench", noise(1, 100)}, {"a", noise(2, 99)}};
    EXPECT_THROW(spa_test(l, "bench"), Error);
    EXPECT_THROW(spa_test(l, "missing"), Error);
    EXPECT_THROW(spa_test({{"bench", noise(1, 10)}}, "bench"), Error);
    l["a"] = noise(2, 100);
    EXPECT_THROW(spa_test(l, "bench", {0, 10.0, 1}), Error);
    EXPECT_THROW(spa_test(l, "bench", {10, 0.5, 1}), Error);
}

TEST(Spa, StationaryBootstrapBlocks) {
    Rng rng(3);
    std::vector<std::size_t> idx;
    stationary_indices(rng, 10'000, 20.0, idx);
    std::size_t jumps = 0;
    for (std::size_t t = 1; t < idx.size(); ++t) {
        jumps += idx[t] != (idx[t - 1] + 1) % idx.size() ? 1 : 0;
    }
    // Expected about n / mean_block restarts.
    EXPECT_NEAR(static_cast<double>(jumps), 10'000.0 / 20.0, 80.0);
}

TEST(Spa, SizeAndPowerSmoke) {
    // Reduced run count; the full calibration lives in the acceptance binary.
    const auto size = spa_calibration(0.0, 100, 101);
    EXPECT_LE(size.rate(), 0.15);
    const auto power = spa_calibration(3.0, 100, 202);
    EXPECT_GE(power.rate(), 0.6);
}
