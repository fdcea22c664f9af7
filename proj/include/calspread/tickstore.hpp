#pragma once

#include "calspread/error.hpp"
#include "calspread/price.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace calspread {

enum class EventKind : std::uint8_t { New, Modify, Cancel, Trade };
enum class Side : std::uint8_t { Bid, Ask, Unknown };
enum class Aggressor : std::uint8_t { Buy, Sell };

constexpr std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::New: return "New";
    case EventKind::Modify: return "Modify";
    case EventKind::Cancel: return "Cancel";
    case EventKind::Trade: return "Trade";
    }
    return "?";
}

constexpr std::string_view to_string(Side s) {
    switch (s) {
    case Side::Bid: return "Bid";
    case Side::Ask: return "Ask";
    case Side::Unknown: return "Unknown";
    }
    return "?";
}

using SymbolId = std::uint16_t;

struct TickEvent {
    std::int64_t ts_nanos = 0;
    SymbolId symbol = 0;
    EventKind kind = EventKind::New;
    Side side = Side::Unknown;
    Price price;
    std::int64_t qty = 0;
    std::optional<std::uint64_t> oid1;
    std::optional<std::uint64_t> oid2;
    std::optional<Aggressor> aggressor;

    bool operator==(const TickEvent&) const = default;
};

/// Side of the book whose resting liquidity the event touches. A buy-aggressor
/// trade consumes the ask; a sell-aggressor trade consumes the bid.
constexpr Side book_side(const TickEvent& ev) {
    if (ev.kind == EventKind::Trade) {
        if (!ev.aggressor) {
            return Side::Unknown;
        }
        return *ev.aggressor == Aggressor::Buy ? Side::Ask : Side::Bid;
    }
    return ev.side;
}

/// Parsed events plus the symbol dictionary they index into.
struct TickStream {
    std::vector<std::string> symbols;
    std::vector<TickEvent> events;

    SymbolId intern(std::string_view name) {
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            if (symbols[i] == name) {
                return static_cast<SymbolId>(i);
            }
        }
        symbols.emplace_back(name);
        return static_cast<SymbolId>(symbols.size() - 1);
    }

    [[nodiscard]] std::optional<SymbolId> find(std::string_view name) const {
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            if (symbols[i] == name) {
                return static_cast<SymbolId>(i);
            }
        }
        return std::nullopt;
    }

    /// Events of one symbol, re-indexed into a single-symbol stream.
    [[nodiscard]] TickStream filter(std::string_view name) const {
        TickStream out;
        const auto id = find(name);
        if (!id) {
            return out;
        }
        out.symbols.emplace_back(name);
        for (const auto& ev : events) {
            if (ev.symbol == *id) {
                out.events.push_back(ev);
                out.events.back().symbol = 0;
            }
        }
        return out;
    }
};

struct ColumnMapping {
    std::string ts = "Server_epoch_nanos";
    std::string symbol = "Symbol";
    std::string event_type = "event_type";
    std::string side = "side";
    std::string price = "Price";
    std::string qty = "Qty";
    std::string oid1 = "OID1";
    std::string oid2 = "OID2";
    std::string agg = "Agg";
    std::string capture = "capture_timestampz";
};

struct ParseOptions {
    Price tick_size = Price::from_raw(500); // 0.05 INR
    std::int64_t jitter_tolerance_nanos = 0;
    char delimiter = ',';
    bool dedupe_trades = true;
    ColumnMapping columns;
};

struct ParseReport {
    std::size_t rows = 0;
    std::size_t events = 0;
    std::size_t duplicate_trades = 0;
    std::size_t reordered = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline void split(std::string_view line, char delim, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::string row_error(std::size_t row, std::string_view reason) {
    return "row " + std::to_string(row) + ": " + std::string(reason);
}

// civil_from_days (H. Hinnant), proleptic Gregorian.
inline std::array<int, 3> civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

} // namespace detail

/// "2022-02-07 09:59:58.953429992+00" rendering of an epoch-nanosecond stamp.
inline std::string format_capture_timestamp(std::int64_t ts_nanos) {
    constexpr std::int64_t kDay = 86'400'000'000'000LL;
    std::int64_t days = ts_nanos / kDay;
    std::int64_t rem = ts_nanos % kDay;
    if (rem < 0) {
        rem += kDay;
        --days;
    }
    const auto ymd = detail::civil_from_days(days);
    const std::int64_t secs = rem / 1'000'000'000LL;
    const std::int64_t nanos = rem % 1'000'000'000LL;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02lld:%02lld:%02lld.%09lld+00", ymd[0], ymd[1], ymd[2],
                  static_cast<long long>(secs / 3600), static_cast<long long>((secs / 60) % 60),
                  static_cast<long long>(secs % 60), static_cast<long long>(nanos));
    return buf;
}

/// Parses the delimiter-separated tick layout (header row required). Rows are
/// kept in file order; a timestamp that goes backwards by at most the jitter
/// tolerance is re-sorted (stable), anything larger is rejected.
inline TickStream parse_ticks(std::istream& in, const ParseOptions& opt = {}, ParseReport* report = nullptr) {
    TickStream stream;
    ParseReport rep;
    std::string line;
    std::vector<std::string_view> cells;

    if (!std::getline(in, line)) {
        if (report) {
            *report = rep;
        }
        return stream;
    }
    detail::split(line, opt.delimiter, cells);
    std::unordered_map<std::string, std::size_t> header;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        header.emplace(std::string(cells[i]), i);
    }
    auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        const auto it = header.find(name);
        if (it == header.end()) {
            if (required) {
                fail(Errc::MalformedRow, detail::row_error(0, "missing header column '" + name + "'"));
            }
            return std::nullopt;
        }
        return it->second;
    };
    const auto& c = opt.columns;
    const std::size_t col_ts = *column(c.ts, true);
    const std::size_t col_symbol = *column(c.symbol, true);
    const std::size_t col_type = *column(c.event_type, true);
    const std::size_t col_side = *column(c.side, true);
    const std::size_t col_price = *column(c.price, true);
    const std::size_t col_qty = *column(c.qty, true);
    const std::size_t col_oid1 = *column(c.oid1, true);
    const std::size_t col_oid2 = *column(c.oid2, true);
    const std::size_t col_agg = *column(c.agg, true);
    const std::size_t needed =
        std::max({col_ts, col_symbol, col_type, col_side, col_price, col_qty, col_oid1, col_oid2, col_agg}) + 1;

    std::int64_t max_ts = 0;
    bool needs_sort = false;
    std::size_t row = 0;
    // (ts, oid1, oid2, price, qty) of trades sharing the current timestamp
    std::vector<std::array<std::int64_t, 5>> same_ts_trades;
    std::int64_t same_ts = -1;

    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) {
            continue;
        }
        ++rep.rows;
        detail::split(line, opt.delimiter, cells);
        if (cells.size() < needed) {
            fail(Errc::MalformedRow, detail::row_error(row, "expected at least " + std::to_string(needed) + " columns"));
        }
        TickEvent ev;
        if (!detail::parse_int(cells[col_ts], ev.ts_nanos) || ev.ts_nanos <= 0) {
            fail(Errc::MalformedRow, detail::row_error(row, "bad timestamp '" + std::string(cells[col_ts]) + "'"));
        }
        const auto type = cells[col_type];
        if (type == "N" || type == "NEW") {
            ev.kind = EventKind::New;
        } else if (type == "MODIFY_TICK" || type == "MODIFY") {
            ev.kind = EventKind::Modify;
        } else if (type == "CANCEL_TICK" || type == "CANCEL") {
            ev.kind = EventKind::Cancel;
        } else if (type == "TRADE") {
            ev.kind = EventKind::Trade;
        } else {
            fail(Errc::UnknownEventType, detail::row_error(row, "event_type '" + std::string(type) + "'"));
        }
        const auto side = cells[col_side];
        if (side == "BUY") {
            ev.side = Side::Bid;
        } else if (side == "SELL") {
            ev.side = Side::Ask;
        } else if (side.empty()) {
            ev.side = Side::Unknown;
        } else {
            fail(Errc::MalformedRow, detail::row_error(row, "bad side '" + std::string(side) + "'"));
        }
        const auto price = Price::parse(cells[col_price]);
        if (!price || price->raw() < 0) {
            fail(Errc::MalformedRow, detail::row_error(row, "bad price '" + std::string(cells[col_price]) + "'"));
        }
        if (!price->is_multiple_of(opt.tick_size)) {
            fail(Errc::MalformedRow, detail::row_error(row, "price " + price->to_string() + " is off the tick grid"));
        }
        ev.price = *price;
        if (!detail::parse_int(cells[col_qty], ev.qty) || ev.qty <= 0) {
            fail(Errc::MalformedRow, detail::row_error(row, "bad qty '" + std::string(cells[col_qty]) + "'"));
        }
        for (auto [col, dst] : {std::pair{col_oid1, &ev.oid1}, std::pair{col_oid2, &ev.oid2}}) {
            if (!cells[col].empty()) {
                std::uint64_t v = 0;
                if (!detail::parse_int(cells[col], v)) {
                    fail(Errc::MalformedRow, detail::row_error(row, "bad order id '" + std::string(cells[col]) + "'"));
                }
                *dst = v;
            }
        }
        const auto agg = cells[col_agg];
        if (agg == "BUY") {
            ev.aggressor = Aggressor::Buy;
        } else if (agg == "SELL") {
            ev.aggressor = Aggressor::Sell;
        } else if (!agg.empty()) {
            fail(Errc::MalformedRow, detail::row_error(row, "bad aggressor '" + std::string(agg) + "'"));
        }
        if (ev.kind == EventKind::Trade && !ev.aggressor) {
            fail(Errc::MalformedRow, detail::row_error(row, "trade without aggressor"));
        }
        if (ev.kind != EventKind::Trade && ev.side == Side::Unknown) {
            fail(Errc::MalformedRow, detail::row_error(row, "order event without side"));
        }
        ev.symbol = stream.intern(cells[col_symbol]);

        if (ev.ts_nanos < max_ts) {
            if (max_ts - ev.ts_nanos > opt.jitter_tolerance_nanos) {
                fail(Errc::NonMonotonicTimestamp,
                     detail::row_error(row, "timestamp " + std::to_string(ev.ts_nanos) + " precedes " +
                                                std::to_string(max_ts) + " beyond tolerance"));
            }
            needs_sort = true;
            ++rep.reordered;
        }
        max_ts = std::max(max_ts, ev.ts_nanos);

        if (opt.dedupe_trades && ev.kind == EventKind::Trade) {
            if (ev.ts_nanos != same_ts) {
                same_ts = ev.ts_nanos;
                same_ts_trades.clear();
            }
            const std::array<std::int64_t, 5> key{ev.ts_nanos, static_cast<std::int64_t>(ev.oid1.value_or(0)),
                                                  static_cast<std::int64_t>(ev.oid2.value_or(0)), ev.price.raw(),
                                                  ev.qty};
            if (std::find(same_ts_trades.begin(), same_ts_trades.end(), key) != same_ts_trades.end()) {
                ++rep.duplicate_trades;
                continue;
            }
            same_ts_trades.push_back(key);
        }
        stream.events.push_back(ev);
    }
    if (needs_sort) {
        std::stable_sort(stream.events.begin(), stream.events.end(),
                         [](const TickEvent& a, const TickEvent& b) { return a.ts_nanos < b.ts_nanos; });
    }
    rep.events = stream.events.size();
    if (report) {
        *report = rep;
    }
    return stream;
}

inline TickStream parse_tick_file(const std::string& path, const ParseOptions& opt = {},
                                  ParseReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) {
        fail(Errc::Io, "cannot open tick file '" + path + "'");
    }
    return parse_ticks(in, opt, report);
}

/// Writes events back in the exchange column layout, header included.
inline void write_ticks(std::ostream& out, const TickStream& stream, char delim = ',') {
    const ColumnMapping c;
    out << c.ts << delim << c.symbol << delim << c.event_type << delim << c.side << delim << c.price << delim << c.qty
        << delim << c.oid1 << delim << c.oid2 << delim << c.agg << delim << c.capture << '\n';
    for (const auto& ev : stream.events) {
        out << ev.ts_nanos << delim << stream.symbols.at(ev.symbol) << delim;
        switch (ev.kind) {
        case EventKind::New: out << 'N'; break;
        case EventKind::Modify: out << "MODIFY_TICK"; break;
        case EventKind::Cancel: out << "CANCEL_TICK"; break;
        case EventKind::Trade: out << "TRADE"; break;
        }
        out << delim;
        if (ev.side == Side::Bid) {
            out << "BUY";
        } else if (ev.side == Side::Ask) {
            out << "SELL";
        }
        out << delim << ev.price.to_string() << delim << ev.qty << delim;
        if (ev.oid1) {
            out << *ev.oid1;
        }
        out << delim;
        if (ev.oid2) {
            out << *ev.oid2;
        }
        out << delim;
        if (ev.aggressor) {
            out << (*ev.aggressor == Aggressor::Buy ? "BUY" : "SELL");
        }
        out << delim << format_capture_timestamp(ev.ts_nanos) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Classification into reference-impacting event types
// ---------------------------------------------------------------------------

enum class Label : std::uint8_t { TradeAsk, TradeBid, CancelAsk, CancelBid, PdmAsk, PdmBid, Other };

inline constexpr std::array<Label, 6> kReferenceLabels{Label::TradeAsk, Label::TradeBid, Label::CancelAsk,
                                                       Label::CancelBid, Label::PdmAsk,   Label::PdmBid};

constexpr std::string_view to_string(Label l) {
    switch (l) {
    case Label::TradeAsk: return "T_A";
    case Label::TradeBid: return "T_B";
    case Label::CancelAsk: return "C_A";
    case Label::CancelBid: return "C_B";
    case Label::PdmAsk: return "PDM_A";
    case Label::PdmBid: return "PDM_B";
    case Label::Other: return "Other";
    }
    return "?";
}

constexpr bool is_reference_impacting(Label l) { return l != Label::Other; }

constexpr Side side_of(Label l) {
    switch (l) {
    case Label::TradeAsk:
    case Label::CancelAsk:
    case Label::PdmAsk: return Side::Ask;
    case Label::TradeBid:
    case Label::CancelBid:
    case Label::PdmBid: return Side::Bid;
    case Label::Other: return Side::Unknown;
    }
    return Side::Unknown;
}

struct ClassifiedEvent {
    TickEvent base;
    Label label = Label::Other;

    bool operator==(const ClassifiedEvent&) const = default;
};

/// Top-of-book facts the classifier needs for one event: the best price on the
/// event's side immediately before it, and what that best price would be right
/// after applying it (nullopt = side empty).
struct BookProbe {
    bool side_ready = false;
    std::optional<Price> best_before;
    std::optional<Price> best_after;
};

/// Pure labelling rule. Trades need no book; cancels and modifies do.
inline Label classify_event(const TickEvent& ev, const BookProbe& probe) {
    if (ev.kind == EventKind::Trade) {
        return *ev.aggressor == Aggressor::Buy ? Label::TradeAsk : Label::TradeBid;
    }
    if (ev.kind == EventKind::New) {
        return Label::Other;
    }
    if (!probe.side_ready || !probe.best_before) {
        fail(Errc::BookStateUnavailable, "no best price on the event's side at ts " + std::to_string(ev.ts_nanos));
    }
    const Price best = *probe.best_before;
    const bool bid = ev.side == Side::Bid;
    if (ev.kind == EventKind::Cancel) {
        if (ev.price == best) {
            return bid ? Label::CancelBid : Label::CancelAsk;
        }
        return Label::Other;
    }
    // Modify: PDM iff the side's best price strictly worsens.
    const bool worsened = !probe.best_after || (bid ? *probe.best_after < best : *probe.best_after > best);
    if (worsened) {
        return bid ? Label::PdmBid : Label::PdmAsk;
    }
    return Label::Other;
}

/// Labels a time-ordered stream; `book` is called before each event and must
/// describe the book state immediately prior to it (the caller advances its
/// own book after the call).
inline std::vector<ClassifiedEvent> classify_events(std::span<const TickEvent> events,
                                                    const std::function<BookProbe(const TickEvent&)>& book) {
    std::vector<ClassifiedEvent> out;
    out.reserve(events.size());
    for (const auto& ev : events) {
        out.push_back({ev, classify_event(ev, book(ev))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Window grid and windowed views
// ---------------------------------------------------------------------------

struct Window {
    std::int64_t begin = 0; // w1, inclusive
    std::int64_t end = 0;   // w2, exclusive

    [[nodiscard]] bool contains(std::int64_t t) const { return t >= begin && t < end; }
    bool operator==(const Window&) const = default;
};

struct WindowGrid {
    std::int64_t start_nanos = 0;
    std::int64_t end_nanos = 0;
    std::int64_t step_nanos = 1;
    std::int64_t width_nanos = 1;

    [[nodiscard]] std::size_t size() const {
        if (step_nanos <= 0 || width_nanos <= 0 || end_nanos - start_nanos < width_nanos) {
            return 0;
        }
        return static_cast<std::size_t>((end_nanos - start_nanos - width_nanos) / step_nanos) + 1;
    }

    [[nodiscard]] Window at(std::size_t k) const {
        const std::int64_t w1 = start_nanos + static_cast<std::int64_t>(k) * step_nanos;
        return {w1, w1 + width_nanos};
    }

    /// Index of the window containing [w.begin, w.end) entirely, if any.
    [[nodiscard]] std::optional<std::size_t> containing(const Window& w) const {
        if (w.begin < start_nanos || step_nanos <= 0) {
            return std::nullopt;
        }
        const auto k = static_cast<std::size_t>((w.begin - start_nanos) / step_nanos);
        if (k >= size()) {
            return std::nullopt;
        }
        const Window o = at(k);
        if (w.begin >= o.begin && w.end <= o.end) {
            return k;
        }
        return std::nullopt;
    }
};

inline std::int64_t ts_of(const TickEvent& ev) { return ev.ts_nanos; }
inline std::int64_t ts_of(const ClassifiedEvent& ev) { return ev.base.ts_nanos; }

template <typename Event>
struct WindowView {
    Window window;
    std::span<const Event> history; // (w1 - lookback, w1)
    std::span<const Event> future;  // [w1, w2)
};

/// Zero-copy per-window slices over a time-ordered sequence.
template <typename Event>
std::vector<WindowView<Event>> window_events(std::span<const Event> events, const WindowGrid& grid,
                                             std::int64_t lookback_nanos) {
    if (lookback_nanos <= 0) {
        fail(Errc::InvalidArgument, "lookback must be positive");
    }
    const std::size_t n = grid.size();
    if (n == 0) {
        fail(Errc::EmptyGrid, "window grid contains no windows");
    }
    auto first_at_or_after = [&](std::int64_t t) {
        return static_cast<std::size_t>(
            std::partition_point(events.begin(), events.end(), [t](const Event& e) { return ts_of(e) < t; }) -
            events.begin());
    };
    auto first_after = [&](std::int64_t t) {
        return static_cast<std::size_t>(
            std::partition_point(events.begin(), events.end(), [t](const Event& e) { return ts_of(e) <= t; }) -
            events.begin());
    };
    std::vector<WindowView<Event>> views;
    views.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Window w = grid.at(k);
        const std::size_t h0 = first_after(w.begin - lookback_nanos);
        const std::size_t f0 = first_at_or_after(w.begin);
        const std::size_t f1 = first_at_or_after(w.end);
        views.push_back({w, events.subspan(h0, f0 - h0), events.subspan(f0, f1 - f0)});
    }
    return views;
}

template <typename Event>
std::vector<WindowView<Event>> window_events(const std::vector<Event>& events, const WindowGrid& grid,
                                             std::int64_t lookback_nanos) {
    return window_events(std::span<const Event>(events), grid, lookback_nanos);
}

} // namespace calspread
