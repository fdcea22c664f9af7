#include "calspread/clf.hpp"

#include "clf_properties.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace calspread;
using namespace testsupport;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return Errc::Io;
}

ClfRecord rec(std::int64_t ts, double c, double n) {
    ClfTick t;
    t.ts_nanos = ts;
    t.c[0] = c;
    t.n[0] = n;
    return clf_record(t, 1);
}

} // namespace

TEST(Clf, DisplayedCurrentBid) {
    const auto feb = feb_book();
    const double d1 = std::log(17455.0 / 17450.0) / std::log(50.0);
    const double d2 = std::log(17455.0 / 17401.1) / std::log(100.0);
    EXPECT_NEAR(clf_current_bid(feb, 1), d1, 1e-9 * d1);
    EXPECT_NEAR(clf_current_bid(feb, 2), d2, 1e-9 * d2);
    EXPECT_NEAR(clf_current_bid(feb, 1), 7.323e-5, 1e-3 * 7.323e-5);
    EXPECT_NEAR(clf_current_bid(feb, 2), 6.716e-4, 1e-3 * 6.716e-4);
}

TEST(Clf, DisplayedNextAsk) {
    const auto mar = mar_book();
    const double d1 = std::log(17516.55 / 17516.5) / std::log(150.0);
    const double d4 = std::log(17523.4 / 17516.5) / std::log(300.0);
    EXPECT_NEAR(clf_next_ask(mar, 1), d1, 1e-9 * d1);
    EXPECT_NEAR(clf_next_ask(mar, 4), d4, 1e-9 * d4);
    EXPECT_NEAR(clf_next_ask(mar, 1), 5.697e-7, 1e-3 * 5.697e-7);
    EXPECT_NEAR(clf_next_ask(mar, 4), 6.904e-5, 1e-3 * 6.904e-5);
}

TEST(Clf, Errors) {
    auto flat = snapshot(ladder({{"100.00", 5}, {"100.00", 5}}), ladder({{"101.00", 5}, {"101.05", 5}}));
    EXPECT_EQ(code_of([&] { clf_current_bid(flat, 1); }), Errc::NonPositiveNumerator);
    EXPECT_EQ(code_of([&] { clf_next_ask(mar_book(), 5); }), Errc::InsufficientLevels);
    EXPECT_EQ(code_of([&] { clf_next_ask(mar_book(), 0); }), Errc::InsufficientLevels);
    auto thin = snapshot(ladder({{"100.00", 1}, {"99.95", 5}}), ladder({{"101.00", 5}, {"101.05", 5}}));
    EXPECT_EQ(code_of([&] { clf_current_bid(thin, 1); }), Errc::DegenerateDepth);
    EXPECT_FALSE(try_clf(thin, Side::Bid, 1));
    EXPECT_TRUE(try_clf(thin, Side::Ask, 1));
}

TEST(Clf, UnusableSnapshotGivesNoValue) {
    auto s = feb_book();
    s.crossed = true;
    EXPECT_FALSE(try_clf(s, Side::Bid, 1));
    s.crossed = false;
    s.ready = false;
    EXPECT_FALSE(try_clf(s, Side::Bid, 1));
}

TEST(Clf, MonotoneInGapAndDepth) {
    const auto t = clf_monotonicity(10'000, 5);
    EXPECT_EQ(t.cases, 10'000u);
    EXPECT_EQ(t.failures, 0u);
}

TEST(ClfStream, RawPicks) {
    const auto tick = clf_tick(7, feb_book(), mar_book());
    ASSERT_TRUE(tick.c[1] && tick.n[0]);
    ClfTick mixed;
    mixed.c[0] = *tick.c[1]; // 6.7e-4
    mixed.n[0] = *tick.n[0]; // 5.7e-7
    EXPECT_EQ(clf_record(mixed, 1).raw_pick, Leg::Next);
    EXPECT_EQ(rec(0, 1e-4, 1e-4).raw_pick, Leg::Next);
    EXPECT_EQ(rec(0, 1e-5, 1e-4).raw_pick, Leg::Current);

    ClfTick broken;
    broken.n[0] = 1e-4;
    EXPECT_TRUE(clf_record(broken, 1).skip);

    const std::vector<ClfTick> ticks{tick, broken};
    const auto recs = clf_stream(ticks, 1);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_FALSE(recs[0].skip);
    EXPECT_TRUE(recs[1].skip);
    EXPECT_THROW(clf_stream(ticks, 5), Error);
}

TEST(ClfDecision, ConstantSeriesKeepOrder) {
    std::vector<ClfRecord> recs;
    for (int k = 0; k < 50; ++k) {
        recs.push_back(rec(k * 1'000'000, 2e-4, 1e-4));
    }
    ClfVoteConfig cfg;
    const auto d = clf_decision(recs, cfg);
    EXPECT_EQ(to_chi(d.reference), 1);
    EXPECT_FALSE(d.fallback);
    EXPECT_DOUBLE_EQ(d.smoothed_c, 2e-4);
    EXPECT_DOUBLE_EQ(d.smoothed_n, 1e-4);
    EXPECT_EQ(d.used, 50u);
}

TEST(ClfDecision, EqualSmoothedValuesPickNext) {
    std::vector<ClfRecord> recs{rec(0, 1e-4, 1e-4), rec(5, 1e-4, 1e-4)};
    EXPECT_EQ(clf_decision(recs, {}).reference, Leg::Next);
}

TEST(ClfDecision, MajorityVote) {
    std::vector<ClfRecord> recs;
    for (int k = 0; k < 10; ++k) {
        recs.push_back(k < 7 ? rec(k, 1e-5, 1e-4) : rec(k, 1e-4, 1e-5));
    }
    ClfVoteConfig cfg;
    cfg.mode = VoteMode::Majority;
    const auto d = clf_decision(recs, cfg);
    EXPECT_EQ(d.votes_c, 7u);
    EXPECT_EQ(d.votes_n, 3u);
    EXPECT_EQ(to_chi(d.reference), 0);

    std::vector<ClfRecord> tie{rec(0, 1e-5, 1e-4), rec(1, 1e-4, 1e-5)};
    EXPECT_EQ(clf_decision(tie, cfg).reference, Leg::Next);
}

TEST(ClfDecision, LateCrossingUnderEma) {
    // Window of 1 s with a tick every 10 ms; clf_n drops below clf_c only in
    // the last 100 ms. Half-life = window / 10, so the pre-cross level keeps
    // weight 2^(-100/100) = 1/2 at the end.
    const std::int64_t ms = 1'000'000;
    const double c = 1e-4;
    const double before = 1.2e-4;
    const double after = 0.5e-4;
    std::vector<ClfRecord> recs;
    for (std::int64_t t = 10; t <= 1000; t += 10) {
        recs.push_back(rec(t * ms, c, t <= 900 ? before : after));
    }
    ClfVoteConfig cfg;
    cfg.vote_window_nanos = 1000 * ms;
    cfg.ema_halflife_nanos = 100 * ms;
    const auto d = clf_decision(recs, cfg);

    const double expected_n = after + (before - after) * std::exp2(-1.0);
    EXPECT_NEAR(d.smoothed_n, expected_n, 1e-15);
    EXPECT_DOUBLE_EQ(d.smoothed_c, c);
    EXPECT_LT(expected_n, c);
    EXPECT_EQ(to_chi(d.reference), 1);

    cfg.mode = VoteMode::Majority;
    EXPECT_EQ(to_chi(clf_decision(recs, cfg).reference), 0);
}

TEST(ClfDecision, NoValidTicksFallsBack) {
    ClfRecord skip;
    skip.skip = true;
    std::vector<ClfRecord> recs{skip, skip};
    ClfVoteConfig cfg;
    cfg.fallback = Leg::Current;
    const auto d = clf_decision(recs, cfg);
    EXPECT_TRUE(d.fallback);
    EXPECT_EQ(d.reference, Leg::Current);
    EXPECT_EQ(d.skipped, 2u);
    EXPECT_TRUE(clf_decision(std::span<const ClfRecord>{}, {}).fallback);
}

TEST(ClfDecision, SkippedTicksDoNotMoveEma) {
    ClfRecord skip;
    skip.skip = true;
    skip.ts_nanos = 3;
    std::vector<ClfRecord> a{rec(0, 2e-4, 1e-4), rec(10, 1e-4, 3e-4)};
    std::vector<ClfRecord> b{rec(0, 2e-4, 1e-4), skip, rec(10, 1e-4, 3e-4)};
    const auto da = clf_decision(a, {});
    const auto db = clf_decision(b, {});
    EXPECT_EQ(da.smoothed_c, db.smoothed_c);
    EXPECT_EQ(da.smoothed_n, db.smoothed_n);
    EXPECT_EQ(db.skipped, 1u);
}

TEST(ClfDecision, RejectsBadHalflife) {
    ClfVoteConfig cfg;
    cfg.ema_halflife_nanos = 0;
    EXPECT_THROW(clf_decision(std::span<const ClfRecord>{}, cfg), Error);
}
