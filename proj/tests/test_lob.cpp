#include "calspread/lob.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace calspread;
using namespace testsupport;

namespace {

OrderBook replay(const std::vector<TickEvent>& evs, std::size_t depth = 5) {
    OrderBook book(depth);
    for (const auto& ev : evs) {
        book.apply(ev);
    }
    return book;
}

} // namespace

TEST(OrderBook, SingleInsertion) {
    OrderBook book;
    book.apply(order(EventKind::New, 1, Side::Bid, "17455.00", 50, 1));
    const auto s = book.snapshot_at(1);
    EXPECT_EQ(s.bids, ladder({{"17455.00", 50}}));
    EXPECT_TRUE(s.asks.empty());
    EXPECT_FALSE(s.ready);
    EXPECT_FALSE(s.usable());
}

TEST(OrderBook, EmptyBook) {
    const OrderBook book;
    const auto s = book.snapshot_at(0);
    EXPECT_TRUE(s.bids.empty());
    EXPECT_TRUE(s.asks.empty());
    EXPECT_FALSE(s.best_bid());
    EXPECT_FALSE(book.is_crossed());
}

TEST(OrderBook, DisplayedLadderReplay) {
    const auto feb = replay(seed_events(feb_bids(), feb_asks())).snapshot_at(100);
    EXPECT_EQ(feb.bids, feb_bids());
    EXPECT_EQ(feb.asks, feb_asks());
    EXPECT_EQ(feb.best_bid(), px("17455.00"));
    EXPECT_EQ(feb.bids.front().qty, 50);
    EXPECT_EQ(feb.best_ask(), px("17458.55"));
    EXPECT_EQ(feb.asks.front().qty, 50);
    EXPECT_TRUE(feb.usable());

    const auto mar = replay(seed_events(mar_bids(), mar_asks())).snapshot_at(100);
    EXPECT_EQ(mar.bids, mar_bids());
    EXPECT_EQ(mar.asks, mar_asks());
}

TEST(OrderBook, ReplayOrderDoesNotMatter) {
    auto evs = seed_events(feb_bids(), feb_asks());
    std::reverse(evs.begin(), evs.end());
    const auto s = replay(evs).snapshot_at(100);
    EXPECT_EQ(s.bids, feb_bids());
    EXPECT_EQ(s.asks, feb_asks());
}

TEST(OrderBook, TradeConsumesTouch) {
    // Two-level hand oracle: selling 50 into a 50-lot best bid empties it.
    auto evs = seed_events(feb_bids(), feb_asks());
    evs.push_back(trade(20, Aggressor::Sell, "17455.00", 50, 1, 77));
    const auto book = replay(evs);
    EXPECT_EQ(book.best(Side::Bid), px("17450.00"));
    EXPECT_EQ(book.qty_at(Side::Bid, px("17455.00")), 0);
    EXPECT_EQ(book.levels(Side::Bid), 4u);
    EXPECT_EQ(book.best(Side::Ask), px("17458.55"));
}

TEST(OrderBook, PartialTradeAndCancel) {
    auto evs = seed_events(feb_bids(), feb_asks());
    evs.push_back(trade(20, Aggressor::Buy, "17460.00", 200, 88, 9));
    evs.push_back(order(EventKind::Cancel, 21, Side::Bid, "17376.00", 800, 4));
    const auto book = replay(evs);
    EXPECT_EQ(book.qty_at(Side::Ask, px("17460.00")), 350);
    EXPECT_EQ(book.qty_at(Side::Bid, px("17376.00")), 0);
    EXPECT_EQ(book.levels(Side::Bid), 4u);
}

TEST(OrderBook, ModifyMovesOrder) {
    auto evs = seed_events(feb_bids(), feb_asks());
    evs.push_back(order(EventKind::Modify, 20, Side::Bid, "17450.00", 50, 1));
    const auto s = replay(evs).snapshot_at(20);
    EXPECT_EQ(s.bids.front(), (Level{px("17450.00"), 100}));
    EXPECT_EQ(s.bids.size(), 4u);
}

TEST(OrderBook, UnknownModifyIsCountedAndInserted) {
    auto evs = seed_events(feb_bids(), feb_asks());
    evs.push_back(order(EventKind::Modify, 20, Side::Ask, "17470.00", 10, 999));
    const auto book = replay(evs, 10);
    EXPECT_EQ(book.diagnostics().unknown_orders, 1u);
    EXPECT_EQ(book.qty_at(Side::Ask, px("17470.00")), 10);
}

TEST(OrderBook, OverRemovalIsClampedInLenientMode) {
    auto evs = seed_events(feb_bids(), feb_asks());
    evs.push_back(order(EventKind::Cancel, 20, Side::Bid, "17455.00", 80, 1));
    const auto book = replay(evs);
    EXPECT_EQ(book.qty_at(Side::Bid, px("17455.00")), 0);
    EXPECT_EQ(book.diagnostics().clamped_levels, 1u);
}

TEST(OrderBook, OverRemovalFailsInStrictMode) {
    OrderBook book(5, DepthMode::Strict);
    book.apply(order(EventKind::New, 1, Side::Bid, "10.00", 5, 1));
    try {
        book.apply(order(EventKind::Cancel, 2, Side::Bid, "10.00", 6, 2));
        FAIL() << "expected NegativeDepth";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NegativeDepth);
    }
}

TEST(OrderBook, CrossedIntermediateStateIsFlagged) {
    // An ask arrives below the bid before the matching trade print removes it.
    std::vector<TickEvent> evs{order(EventKind::New, 1, Side::Bid, "100.00", 10, 1),
                               order(EventKind::New, 2, Side::Ask, "101.00", 10, 2),
                               order(EventKind::New, 3, Side::Ask, "99.95", 10, 3)};
    OrderBook book;
    for (const auto& ev : evs) {
        book.apply(ev);
    }
    const auto s = book.snapshot_at(3);
    EXPECT_TRUE(s.crossed);
    EXPECT_FALSE(s.usable());
    EXPECT_EQ(book.diagnostics().crossed_states, 1u);
    book.apply(trade(4, Aggressor::Sell, "100.00", 10, 1, 3));
    book.apply(order(EventKind::Cancel, 4, Side::Ask, "99.95", 10, 3));
    EXPECT_FALSE(book.snapshot_at(4).crossed);
}

TEST(OrderBook, SnapshotDepthIsCapped) {
    const auto book = replay(seed_events(feb_bids(), feb_asks()), 3);
    const auto s = book.snapshot_at(0);
    EXPECT_EQ(s.bids.size(), 3u);
    EXPECT_EQ(s.asks.size(), 3u);
    EXPECT_EQ(book.levels(Side::Bid), 5u);
}

TEST(OrderBook, ReplayIsDeterministic) {
    auto evs = seed_events(mar_bids(), mar_asks());
    evs.push_back(trade(30, Aggressor::Buy, "17516.50", 100, 5, 6));
    evs.push_back(order(EventKind::Modify, 31, Side::Bid, "17500.00", 50, 1));
    OrderBook a;
    OrderBook b;
    for (const auto& ev : evs) {
        a.apply(ev);
        b.apply(ev);
        EXPECT_EQ(a.snapshot_at(ev.ts_nanos), b.snapshot_at(ev.ts_nanos));
    }
}

TEST(Vwap, DisplayedLadders) {
    const auto feb = feb_book();
    const auto mar = mar_book();
    EXPECT_DOUBLE_EQ(vwap_reference(feb, Side::Bid, 1), 17455.0);
    EXPECT_DOUBLE_EQ(vwap_reference(feb, Side::Bid, 2), (17455.0 * 50 + 17450.0 * 50) / 100);
    EXPECT_DOUBLE_EQ(vwap_reference(feb, Side::Bid, 2), 17452.5);
    EXPECT_DOUBLE_EQ(vwap_reference(mar, Side::Ask, 2), 17516.5125);
    EXPECT_DOUBLE_EQ(vwap_reference(mar, Side::Ask, 1), 17516.5);
}

TEST(Vwap, InsufficientDepth) {
    const auto feb = feb_book();
    EXPECT_THROW(vwap_reference(feb, Side::Bid, 6), Error);
    EXPECT_THROW(vwap_reference(feb, Side::Bid, 0), Error);
}

TEST(Snapshot, RowLayoutIsStable) {
    std::ostringstream out;
    auto s = snapshot(ladder({{"10.00", 5}}), ladder({{"10.05", 7}, {"10.10", 1}}), 42);
    write_snapshot_row(out, 3, "c", s, 2);
    EXPECT_EQ(out.str(), "3\tc\t42\t1\t0\t10.00\t5\t\t\t10.05\t7\t10.10\t1\n");
}
