#pragma once

#include "calspread/error.hpp"
#include "calspread/price.hpp"
#include "calspread/tickstore.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

namespace calspread {

struct Level {
    Price price;
    std::int64_t qty = 0;

    bool operator==(const Level&) const = default;
};

/// Immutable top-of-book copy. `crossed` marks an intermediate replay state
/// with best bid >= best ask; `ready` is false until both sides have seen events.
struct BookSnapshot {
    std::int64_t ts_nanos = 0;
    std::vector<Level> bids; // best first, strictly decreasing
    std::vector<Level> asks; // best first, strictly increasing
    bool crossed = false;
    bool ready = false;

    [[nodiscard]] std::optional<Price> best_bid() const {
        return bids.empty() ? std::nullopt : std::optional<Price>(bids.front().price);
    }
    [[nodiscard]] std::optional<Price> best_ask() const {
        return asks.empty() ? std::nullopt : std::optional<Price>(asks.front().price);
    }
    [[nodiscard]] const std::vector<Level>& side(Side s) const { return s == Side::Bid ? bids : asks; }
    [[nodiscard]] bool usable() const { return ready && !crossed && !bids.empty() && !asks.empty(); }

    bool operator==(const BookSnapshot&) const = default;
};

enum class DepthMode { Lenient, Strict };

struct BookDiagnostics {
    std::size_t events = 0;
    std::size_t clamped_levels = 0;  // would have gone negative (lenient mode)
    std::size_t unknown_orders = 0;  // modify of an order never seen
    std::size_t crossed_states = 0;

    bool operator==(const BookDiagnostics&) const = default;
};

/// Price-level aggregated book for one contract, with an order-id map kept only
/// so that modifies can be turned into remove-then-insert.
class OrderBook {
public:
    explicit OrderBook(std::size_t depth = 5, DepthMode mode = DepthMode::Lenient) : depth_(depth), mode_(mode) {}

    void apply(const TickEvent& ev) {
        ++diag_.events;
        switch (ev.kind) {
        case EventKind::New:
            mark_seen(ev.side);
            if (ev.oid1) {
                forget_order(*ev.oid1);
                orders_[*ev.oid1] = {ev.side, ev.price, ev.qty};
            }
            add(ev.side, ev.price, ev.qty);
            break;
        case EventKind::Cancel:
            mark_seen(ev.side);
            if (ev.oid1) {
                orders_.erase(*ev.oid1);
            }
            remove(ev.side, ev.price, ev.qty);
            break;
        case EventKind::Modify: {
            mark_seen(ev.side);
            if (ev.oid1) {
                const auto it = orders_.find(*ev.oid1);
                if (it != orders_.end()) {
                    remove(it->second.side, it->second.price, it->second.qty);
                    it->second = {ev.side, ev.price, ev.qty};
                } else {
                    ++diag_.unknown_orders;
                    orders_[*ev.oid1] = {ev.side, ev.price, ev.qty};
                }
            } else {
                ++diag_.unknown_orders;
            }
            add(ev.side, ev.price, ev.qty);
            break;
        }
        case EventKind::Trade: {
            const Side resting = book_side(ev);
            mark_seen(resting);
            for (const auto& oid : {ev.oid1, ev.oid2}) {
                if (!oid) {
                    continue;
                }
                const auto it = orders_.find(*oid);
                if (it != orders_.end() && it->second.side == resting) {
                    it->second.qty -= ev.qty;
                    if (it->second.qty <= 0) {
                        orders_.erase(it);
                    }
                    break;
                }
            }
            remove(resting, ev.price, ev.qty);
            break;
        }
        }
        if (is_crossed()) {
            ++diag_.crossed_states;
        }
    }

    [[nodiscard]] std::optional<Price> best(Side s) const {
        if (s == Side::Bid) {
            return bids_.empty() ? std::nullopt : std::optional<Price>(bids_.begin()->first);
        }
        return asks_.empty() ? std::nullopt : std::optional<Price>(asks_.begin()->first);
    }

    [[nodiscard]] std::int64_t qty_at(Side s, Price p) const {
        if (s == Side::Bid) {
            const auto it = bids_.find(p);
            return it == bids_.end() ? 0 : it->second;
        }
        const auto it = asks_.find(p);
        return it == asks_.end() ? 0 : it->second;
    }

    [[nodiscard]] std::size_t levels(Side s) const { return s == Side::Bid ? bids_.size() : asks_.size(); }
    [[nodiscard]] bool ready() const { return seen_bid_ && seen_ask_; }
    [[nodiscard]] bool is_crossed() const {
        return !bids_.empty() && !asks_.empty() && bids_.begin()->first >= asks_.begin()->first;
    }
    [[nodiscard]] std::size_t depth() const { return depth_; }
    [[nodiscard]] const BookDiagnostics& diagnostics() const { return diag_; }

    /// Top-`depth` copy of both sides at time t. The caller guarantees every
    /// event with ts <= t has been applied.
    [[nodiscard]] BookSnapshot snapshot_at(std::int64_t t) const {
        BookSnapshot snap;
        snap.ts_nanos = t;
        snap.ready = ready();
        snap.crossed = is_crossed();
        copy_top(bids_, snap.bids);
        copy_top(asks_, snap.asks);
        return snap;
    }

    /// Best price on the event's side before and (hypothetically) after the event.
    [[nodiscard]] BookProbe probe(const TickEvent& ev) const {
        BookProbe p;
        const Side s = book_side(ev);
        if (s == Side::Unknown) {
            return p;
        }
        p.side_ready = s == Side::Bid ? seen_bid_ : seen_ask_;
        p.best_before = best(s);
        if (ev.kind != EventKind::Modify) {
            return p;
        }
        // Modify = remove the order's old quantity, then insert at the new price.
        std::optional<Price> after;
        std::optional<std::pair<Price, std::int64_t>> removed;
        if (ev.oid1) {
            const auto it = orders_.find(*ev.oid1);
            if (it != orders_.end() && it->second.side == s) {
                removed = std::pair{it->second.price, it->second.qty};
            }
        }
        auto consider = [&](Price candidate) {
            if (!after || (s == Side::Bid ? candidate > *after : candidate < *after)) {
                after = candidate;
            }
        };
        auto scan = [&](const auto& ladder) {
            for (const auto& [price, qty] : ladder) {
                const std::int64_t left = removed && removed->first == price ? qty - removed->second : qty;
                if (left > 0) {
                    consider(price);
                    return;
                }
            }
        };
        if (s == Side::Bid) {
            scan(bids_);
        } else {
            scan(asks_);
        }
        consider(ev.price);
        p.best_after = after;
        return p;
    }

private:
    struct Order {
        Side side;
        Price price;
        std::int64_t qty;
    };

    template <typename Ladder>
    void copy_top(const Ladder& ladder, std::vector<Level>& out) const {
        out.reserve(std::min(depth_, ladder.size()));
        for (const auto& [price, qty] : ladder) {
            if (out.size() >= depth_) {
                break;
            }
            out.push_back({price, qty});
        }
    }

    void mark_seen(Side s) {
        if (s == Side::Bid) {
            seen_bid_ = true;
        } else if (s == Side::Ask) {
            seen_ask_ = true;
        }
    }

    void forget_order(std::uint64_t oid) {
        const auto it = orders_.find(oid);
        if (it != orders_.end()) {
            remove(it->second.side, it->second.price, it->second.qty);
            orders_.erase(it);
        }
    }

    void add(Side s, Price p, std::int64_t q) {
        if (s == Side::Bid) {
            bids_[p] += q;
        } else if (s == Side::Ask) {
            asks_[p] += q;
        }
    }

    template <typename Ladder>
    void remove_from(Ladder& ladder, Price p, std::int64_t q) {
        const auto it = ladder.find(p);
        const std::int64_t have = it == ladder.end() ? 0 : it->second;
        if (have < q) {
            if (mode_ == DepthMode::Strict) {
                fail(Errc::NegativeDepth, "removing " + std::to_string(q) + " at " + p.to_string() + " with only " +
                                              std::to_string(have) + " resting");
            }
            ++diag_.clamped_levels;
        }
        if (it == ladder.end()) {
            return;
        }
        it->second -= q;
        if (it->second <= 0) {
            ladder.erase(it);
        }
    }

    void remove(Side s, Price p, std::int64_t q) {
        if (s == Side::Bid) {
            remove_from(bids_, p, q);
        } else if (s == Side::Ask) {
            remove_from(asks_, p, q);
        }
    }

    std::size_t depth_;
    DepthMode mode_;
    std::map<Price, std::int64_t, std::greater<>> bids_;
    std::map<Price, std::int64_t> asks_;
    std::unordered_map<std::uint64_t, Order> orders_;
    bool seen_bid_ = false;
    bool seen_ask_ = false;
    BookDiagnostics diag_;
};

/// Quantity-weighted average price over the best `levels` levels of one side.
inline double vwap_reference(const BookSnapshot& snap, Side side, std::size_t levels) {
    const auto& ladder = snap.side(side);
    if (levels < 1 || levels > ladder.size()) {
        fail(Errc::InsufficientDepth, "vwap over " + std::to_string(levels) + " levels with " +
                                          std::to_string(ladder.size()) + " available");
    }
    // Exact integer accumulation, one division at the end.
    __int128 notional = 0;
    std::int64_t qty = 0;
    for (std::size_t i = 0; i < levels; ++i) {
        notional += static_cast<__int128>(ladder[i].price.raw()) * ladder[i].qty;
        qty += ladder[i].qty;
    }
    return static_cast<double>(notional) / static_cast<double>(qty) / static_cast<double>(Price::kScale);
}

struct ClassifyStats {
    std::size_t unavailable = 0; // cancels/modifies seen before their side warmed up
};

/// Replays a single-contract stream through its own book and labels every event.
/// In lenient mode, events that need book state before warm-up become Other.
inline std::vector<ClassifiedEvent> classify_stream(std::span<const TickEvent> events, std::size_t depth = 5,
                                                    bool lenient = true, ClassifyStats* stats = nullptr) {
    OrderBook book(depth);
    std::vector<ClassifiedEvent> out;
    out.reserve(events.size());
    ClassifyStats st;
    for (const auto& ev : events) {
        Label label = Label::Other;
        try {
            label = classify_event(ev, book.probe(ev));
        } catch (const Error& e) {
            if (!lenient || e.code() != Errc::BookStateUnavailable) {
                throw;
            }
            ++st.unavailable;
        }
        out.push_back({ev, label});
        book.apply(ev);
    }
    if (stats) {
        *stats = st;
    }
    return out;
}

/// One tab-separated row per (window, contract): levels padded to `depth`.
inline void write_snapshot_row(std::ostream& out, std::size_t window, std::string_view contract,
                               const BookSnapshot& snap, std::size_t depth) {
    out << window << '\t' << contract << '\t' << snap.ts_nanos << '\t' << (snap.ready ? 1 : 0) << '\t'
        << (snap.crossed ? 1 : 0);
    for (const auto* ladder : {&snap.bids, &snap.asks}) {
        for (std::size_t i = 0; i < depth; ++i) {
            if (i < ladder->size()) {
                out << '\t' << (*ladder)[i].price.to_string() << '\t' << (*ladder)[i].qty;
            } else {
                out << "\t\t";
            }
        }
    }
    out << '\n';
}

} // namespace calspread
