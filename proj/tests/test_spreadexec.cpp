#include "calspread/spreadexec.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace calspread;
using namespace calspread::literals;

TEST(EntryExit, WorkedExample) {
    const auto r = entry_exit_profit(17514.20_inr, 17458.55_inr, 17510.00_inr, 17460.00_inr);
    EXPECT_EQ(r.entry, 55.65_inr);
    EXPECT_EQ(r.exit, 50.00_inr);
    EXPECT_EQ(r.profit, 5.65_inr);
}

TEST(EntryExit, Signs) {
    const auto same = entry_exit_profit(17514.20_inr, 17458.55_inr, 17514.20_inr, 17458.55_inr);
    EXPECT_EQ(same.profit, 0_inr);
    const auto loss = entry_exit_profit(17510.00_inr, 17460.00_inr, 17520.00_inr, 17455.00_inr);
    EXPECT_GT(loss.exit, loss.entry);
    EXPECT_LT(loss.profit, 0_inr);
}

TEST(QuotePrice, NextReference) {
    EXPECT_EQ(quote_price(Leg::Next, 17516.5_inr, 58.5_inr), 17458.0_inr);
    EXPECT_EQ(quote_price(Leg::Next, 17516.5_inr, 0_inr), 17516.5_inr);
}

TEST(QuotePrice, CurrentReference) {
    EXPECT_EQ(quote_price(Leg::Current, 17455_inr, 58.5_inr), 17513.5_inr);
    // The sign as printed yields a negative price, which is rejected.
    try {
        quote_price(Leg::Current, 17455_inr, 58.5_inr, QuoteConvention::Printed);
        FAIL() << "expected NonPositiveQuote";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonPositiveQuote);
    }
    EXPECT_EQ(quote_price(Leg::Current, 10_inr, 58.5_inr, QuoteConvention::Printed), 48.5_inr);
    EXPECT_THROW(quote_price(Leg::Next, 0_inr, 1_inr), Error);
    EXPECT_THROW(quote_price(Leg::Next, 10_inr, 10_inr), Error);
}

TEST(RealizedSpread, WorkedFills) {
    const auto c = realized_spread_and_slippage(Leg::Current, 17514.2_inr, 17458_inr, 58.5_inr);
    EXPECT_EQ(c.realized, 56.2_inr);
    EXPECT_EQ(c.slippage, 2.3_inr);
    const auto n = realized_spread_and_slippage(Leg::Next, 17458.55_inr, 17516.55_inr, 58.5_inr);
    EXPECT_EQ(n.realized, 58.0_inr);
    EXPECT_EQ(n.slippage, 0.5_inr);
}

TEST(RealizedSpread, ZeroAndSymmetry) {
    const auto z = realized_spread_and_slippage(Leg::Next, 17458_inr, 17516.5_inr, 58.5_inr);
    EXPECT_EQ(z.slippage, 0_inr);
    for (const auto& [s, fill_c, fill_n] :
         {std::tuple{58.5_inr, 17458_inr, 17514.2_inr}, std::tuple{40_inr, 17400.05_inr, 17460_inr}}) {
        const auto r = realized_spread_and_slippage(Leg::Next, fill_c, fill_n, s);
        // Swapping the roles of S and the realized spread leaves the slippage unchanged.
        EXPECT_EQ(abs(s - r.realized), r.slippage);
        EXPECT_EQ(abs(r.realized - s), r.slippage);
    }
}

TEST(TheoreticalSpread, CostOfCarry) {
    EXPECT_EQ(theoretical_spread(17455, 0.0, 0.1), 0.0);
    EXPECT_EQ(theoretical_spread(17455, 0.05, 0.0), 0.0);
    const double s = theoretical_spread(17455, 0.05, 0.1);
    EXPECT_NEAR(s, 17455 * (std::exp(0.005) - 1), 1e-9);
    EXPECT_NEAR(s, 87.49, 0.005);
    EXPECT_THROW(theoretical_spread(0, 0.05, 0.1), Error);
}
