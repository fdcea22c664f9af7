#pragma once

#include "calspread/lob.hpp"
#include "calspread/price.hpp"
#include "calspread/tickstore.hpp"

#include <string>
#include <utility>
#include <vector>

namespace testsupport {

using calspread::BookSnapshot;
using calspread::EventKind;
using calspread::Level;
using calspread::Price;
using calspread::Side;
using calspread::TickEvent;

inline Price px(const char* s) { return Price::parse_or_throw(s); }

inline std::vector<Level> ladder(std::initializer_list<std::pair<const char*, std::int64_t>> rows) {
    std::vector<Level> out;
    for (const auto& [p, q] : rows) {
        out.push_back({px(p), q});
    }
    return out;
}

// Top five levels of both order books on 2022-02-07, as displayed for the
// February (current) and March (next) contracts.
inline std::vector<Level> feb_bids() {
    return ladder({{"17455.00", 50}, {"17450.00", 50}, {"17401.10", 100}, {"17376.00", 800}, {"17355.00", 100}});
}
inline std::vector<Level> feb_asks() {
    return ladder({{"17458.55", 50}, {"17459.65", 50}, {"17459.95", 100}, {"17460.00", 550}, {"17475.00", 250}});
}
inline std::vector<Level> mar_bids() {
    return ladder({{"17514.20", 50}, {"17510.20", 150}, {"17510.10", 100}, {"17509.10", 150}, {"17503.60", 50}});
}
inline std::vector<Level> mar_asks() {
    return ladder({{"17516.50", 150}, {"17516.55", 50}, {"17516.70", 50}, {"17517.20", 50}, {"17523.40", 200}});
}

inline BookSnapshot snapshot(std::vector<Level> bids, std::vector<Level> asks, std::int64_t ts = 0) {
    BookSnapshot s;
    s.ts_nanos = ts;
    s.bids = std::move(bids);
    s.asks = std::move(asks);
    s.ready = true;
    return s;
}

inline BookSnapshot feb_book() { return snapshot(feb_bids(), feb_asks()); }
inline BookSnapshot mar_book() { return snapshot(mar_bids(), mar_asks()); }

inline TickEvent order(EventKind kind, std::int64_t ts, Side side, const char* price, std::int64_t qty,
                       std::uint64_t oid) {
    TickEvent ev;
    ev.ts_nanos = ts;
    ev.kind = kind;
    ev.side = side;
    ev.price = px(price);
    ev.qty = qty;
    ev.oid1 = oid;
    return ev;
}

inline TickEvent trade(std::int64_t ts, calspread::Aggressor agg, const char* price, std::int64_t qty,
                       std::uint64_t buyer = 0, std::uint64_t seller = 0) {
    TickEvent ev;
    ev.ts_nanos = ts;
    ev.kind = EventKind::Trade;
    ev.side = Side::Unknown;
    ev.price = px(price);
    ev.qty = qty;
    if (buyer) {
        ev.oid1 = buyer;
    }
    if (seller) {
        ev.oid2 = seller;
    }
    ev.aggressor = agg;
    return ev;
}

/// New-order events that rebuild a ladder pair, one order per level.
inline std::vector<TickEvent> seed_events(const std::vector<Level>& bids, const std::vector<Level>& asks,
                                          std::int64_t ts0 = 1, std::uint64_t oid0 = 1) {
    std::vector<TickEvent> out;
    std::int64_t ts = ts0;
    std::uint64_t oid = oid0;
    for (const auto& l : bids) {
        TickEvent ev = order(EventKind::New, ts++, Side::Bid, "1", l.qty, oid++);
        ev.price = l.price;
        out.push_back(ev);
    }
    for (const auto& l : asks) {
        TickEvent ev = order(EventKind::New, ts++, Side::Ask, "1", l.qty, oid++);
        ev.price = l.price;
        out.push_back(ev);
    }
    return out;
}

} // namespace testsupport
