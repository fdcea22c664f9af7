#include "calspread/hawkes.hpp"

#include "hawkes_checks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace calspread;
using namespace calspread::hawkes;
using testsupport::one_dim;

namespace {

// Direct O(n^2) evaluation of the 1-D exponential log-likelihood.
double brute_loglik(double mu, double alpha, double beta, const std::vector<double>& t, double horizon) {
    double ll = -mu * horizon;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double lambda = mu;
        for (std::size_t j = 0; j < i; ++j) {
            lambda += alpha * std::exp(-beta * (t[i] - t[j]));
        }
        ll += std::log(lambda);
        ll -= alpha / beta * (1.0 - std::exp(-beta * (horizon - t[i])));
    }
    return ll;
}

HawkesModel sample_sumexp() {
    SumExponentialKernel k;
    k.betas = {10.0, 100.0};
    k.alpha = {Eigen::MatrixXd::Constant(2, 2, 1.0), Eigen::MatrixXd::Constant(2, 2, 20.0)};
    return {numbered_index(2), Eigen::Vector2d(0.5, 1.5), k};
}

HawkesModel sample_discretized() {
    DiscretizedKernel k;
    k.support = 0.04;
    k.values = {Eigen::MatrixXd::Constant(2, 2, 5.0), Eigen::MatrixXd::Constant(2, 2, 2.5),
                Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Constant(2, 2, 1.0 / 3.0)};
    return {numbered_index(2), Eigen::Vector2d(0.25, 1.0 / 7.0), k};
}

} // namespace

TEST(KernelNorms, Exponential) {
    EXPECT_DOUBLE_EQ(kernel_norms(one_dim(1.0, 0.8, 2.0))(0, 0), 0.4);
    EXPECT_DOUBLE_EQ(branching_ratio(one_dim(1.0, 0.8, 2.0)), 0.4);
}

TEST(KernelNorms, ZeroKernel) {
    const auto m = poisson_model(Eigen::VectorXd::Constant(3, 2.0));
    EXPECT_TRUE(kernel_norms(m).isZero());
    EXPECT_EQ(branching_ratio(m), 0.0);
}

TEST(KernelNorms, SumExponentialAndDiscretized) {
    const auto se = kernel_norms(sample_sumexp());
    EXPECT_DOUBLE_EQ(se(0, 1), 1.0 / 10.0 + 20.0 / 100.0);
    const auto d = kernel_norms(sample_discretized());
    EXPECT_NEAR(d(1, 0), 0.01 * (5.0 + 2.5 + 0.0 + 1.0 / 3.0), 1e-15);
    EXPECT_TRUE((d.array() >= 0).all());
}

TEST(KernelNorms, SpectralRadiusOfCrossExcitation) {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, 0.6, 0.6, 0.0;
    const auto m = exponential_model(Eigen::Vector2d(1, 1), a, Eigen::MatrixXd::Ones(2, 2));
    EXPECT_NEAR(branching_ratio(m), 0.6, 1e-12);
}

TEST(StationaryRates, IdentityForOneDim) {
    EXPECT_NEAR(stationary_rates(one_dim(1.0, 0.8, 2.0))(0), 1.0 / 0.6, 1e-12);
}

TEST(Likelihood, MatchesBruteForce) {
    const std::vector<double> t{0.1, 0.15, 0.9, 1.0, 1.02, 2.5, 3.7, 3.71};
    EventSeries s(5.0, 1);
    s.times[0] = t;
    const auto m = one_dim(1.3, 0.7, 2.5);
    EXPECT_NEAR(log_likelihood(m, s), brute_loglik(1.3, 0.7, 2.5, t, 5.0), 1e-10);
}

TEST(Likelihood, PoissonClosedForm) {
    EventSeries s(10.0, 2);
    s.times = {{1, 2, 3}, {4.5}};
    const auto m = poisson_model(Eigen::Vector2d(0.5, 2.0));
    EXPECT_NEAR(log_likelihood(m, s), 3 * std::log(0.5) - 5.0 + std::log(2.0) - 20.0, 1e-12);
}

TEST(Likelihood, IntensityAndCompensator) {
    EventSeries s(5.0, 1);
    s.times[0] = {1.0, 2.0};
    const auto m = one_dim(1.0, 0.8, 2.0);
    EXPECT_NEAR(intensity(m, s, 0, 2.5), 1.0 + 0.8 * (std::exp(-3.0) + std::exp(-1.0)), 1e-12);
    const double expect = 1.0 * 2.5 + 0.4 * (std::exp(-1.0) - std::exp(-6.0)) + 0.4 * (1 - std::exp(-4.0));
    EXPECT_NEAR(compensator_between(m, s, 0, 1.5, 4.0), expect, 1e-12);
}

TEST(Likelihood, DiscretizedKernelIsPiecewiseConstant) {
    const auto m = sample_discretized();
    EventSeries s(1.0, 2);
    s.times = {{0.5}, {}};
    // 0.005 after the event: first bin (width 0.01).
    EXPECT_NEAR(intensity(m, s, 1, 0.505), 1.0 / 7.0 + 5.0, 1e-12);
    EXPECT_NEAR(intensity(m, s, 1, 0.525), 1.0 / 7.0, 1e-12);
    EXPECT_NEAR(intensity(m, s, 1, 0.6), 1.0 / 7.0, 1e-12);
}

TEST(ModelDump, RoundTripsBitExactly) {
    for (const auto& m : {one_dim(1.0 / 3.0, 0.8, 2.0), sample_sumexp(), sample_discretized()}) {
        const auto text = model_to_string(m);
        std::istringstream in(text);
        const auto back = read_model(in);
        EXPECT_EQ(back, m) << text;
        EXPECT_EQ(model_to_string(back), text);
    }
}

TEST(ModelDump, RejectsUnknownVersion) {
    std::istringstream in("calspread-hawkes 2\n");
    EXPECT_THROW(read_model(in), Error);
}

TEST(KernelKind, Names) {
    for (auto k : {KernelKind::Exponential, KernelKind::SumExponential, KernelKind::Discretized}) {
        EXPECT_EQ(kernel_kind_from_string(to_string(k)), k);
    }
    EXPECT_THROW(kernel_kind_from_string("gauss"), Error);
    EXPECT_EQ(reference_index().dim(), 6u);
    EXPECT_EQ(all_events_index().dim(), 8u);
    EXPECT_EQ(all_events_index().labels[6], "O_A");
}
