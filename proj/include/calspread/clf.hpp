#pragma once

#include "calspread/error.hpp"
#include "calspread/leg.hpp"
#include "calspread/lob.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace calspread {

/// log(p1 / p_{i+1}) / log(q_1 + ... + q_i) on the bid ladder, or the mirror
/// log(p_{i+1} / p1) / log(...) on the ask ladder. Natural logs.
inline double clf_side(const BookSnapshot& snap, Side side, std::size_t i) {
    const auto& ladder = snap.side(side);
    if (i < 1 || ladder.size() < i + 1) {
        fail(Errc::InsufficientLevels, "CLF depth " + std::to_string(i) + " needs " + std::to_string(i + 1) +
                                           " levels, have " + std::to_string(ladder.size()));
    }
    std::int64_t cum = 0;
    for (std::size_t k = 0; k < i; ++k) {
        cum += ladder[k].qty;
    }
    if (cum <= 1) {
        fail(Errc::DegenerateDepth, "cumulative quantity " + std::to_string(cum) + " over " + std::to_string(i) +
                                        " levels");
    }
    const std::int64_t top = ladder[0].price.raw();
    const std::int64_t deep = ladder[i].price.raw();
    const bool ordered = side == Side::Bid ? top > deep : deep > top;
    if (!ordered || top <= 0 || deep <= 0) {
        fail(Errc::NonPositiveNumerator, "ladder not strictly ordered between level 1 and level " +
                                             std::to_string(i + 1));
    }
    const double ratio = side == Side::Bid ? static_cast<double>(top) / static_cast<double>(deep)
                                           : static_cast<double>(deep) / static_cast<double>(top);
    return std::log(ratio) / std::log(static_cast<double>(cum));
}

inline double clf_current_bid(const BookSnapshot& snap, std::size_t i) { return clf_side(snap, Side::Bid, i); }
inline double clf_next_ask(const BookSnapshot& snap, std::size_t i) { return clf_side(snap, Side::Ask, i); }

inline std::optional<double> try_clf(const BookSnapshot& snap, Side side, std::size_t i) {
    if (!snap.usable()) {
        return std::nullopt;
    }
    try {
        return clf_side(snap, side, i);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline constexpr std::size_t kClfDepths = 4;

/// CLF values at one tick for depths 1..4 (index 0 = depth 1).
struct ClfTick {
    std::int64_t ts_nanos = 0;
    std::array<std::optional<double>, kClfDepths> c{}; // F_c bid side
    std::array<std::optional<double>, kClfDepths> n{}; // F_n ask side
};

inline ClfTick clf_tick(std::int64_t ts, const BookSnapshot& snap_c, const BookSnapshot& snap_n) {
    ClfTick t;
    t.ts_nanos = ts;
    for (std::size_t i = 1; i <= kClfDepths; ++i) {
        t.c[i - 1] = try_clf(snap_c, Side::Bid, i);
        t.n[i - 1] = try_clf(snap_n, Side::Ask, i);
    }
    return t;
}

struct ClfRecord {
    std::int64_t ts_nanos = 0;
    double clf_c = 0.0;
    double clf_n = 0.0;
    Leg raw_pick = Leg::Next; // contract with the lower CLF; ties pick F_n
    bool skip = false;        // either side failed at this tick
};

inline ClfRecord clf_record(const ClfTick& tick, std::size_t depth) {
    ClfRecord r;
    r.ts_nanos = tick.ts_nanos;
    const auto& c = tick.c.at(depth - 1);
    const auto& n = tick.n.at(depth - 1);
    if (!c || !n) {
        r.skip = true;
        return r;
    }
    r.clf_c = *c;
    r.clf_n = *n;
    r.raw_pick = *c < *n ? Leg::Current : Leg::Next;
    return r;
}

inline std::vector<ClfRecord> clf_stream(std::span<const ClfTick> ticks, std::size_t depth) {
    if (depth < 1 || depth > kClfDepths) {
        fail(Errc::InvalidArgument, "CLF depth must be in 1..4");
    }
    std::vector<ClfRecord> out;
    out.reserve(ticks.size());
    for (const auto& t : ticks) {
        out.push_back(clf_record(t, depth));
    }
    return out;
}

enum class VoteMode { Ema, Majority };

struct ClfVoteConfig {
    std::size_t depth = 4;
    std::int64_t vote_window_nanos = 1'000'000'000;
    std::int64_t ema_halflife_nanos = 200'000'000; // vote window / 5
    VoteMode mode = VoteMode::Ema;
    Leg fallback = Leg::Next;
};

/// Irregularly spaced EMA: s += (1 - 2^(-dt/h)) (x - s), started at the first value.
class TimeEma {
public:
    explicit TimeEma(std::int64_t halflife_nanos) : halflife_(static_cast<double>(halflife_nanos)) {}

    void update(std::int64_t ts, double x) {
        if (!started_) {
            value_ = x;
            started_ = true;
        } else {
            const double dt = static_cast<double>(ts - last_);
            const double w = 1.0 - std::exp2(-dt / halflife_);
            value_ += w * (x - value_);
        }
        last_ = ts;
    }
    [[nodiscard]] bool started() const { return started_; }
    [[nodiscard]] double value() const { return value_; }

private:
    double halflife_;
    double value_ = 0.0;
    std::int64_t last_ = 0;
    bool started_ = false;
};

struct ClfDecision {
    Leg reference = Leg::Next;
    bool fallback = false; // no valid tick in the vote window
    double smoothed_c = 0.0;
    double smoothed_n = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
    std::size_t votes_c = 0;
    std::size_t votes_n = 0;
};

/// Decision from the records of one vote window (caller selects the ticks
/// with ts in (w1 - vote_window, w1]). chi^B = 1 iff smoothed clf_n < clf_c,
/// with equality also giving 1; majority mode breaks ties toward F_n.
inline ClfDecision clf_decision(std::span<const ClfRecord> records, const ClfVoteConfig& cfg) {
    if (cfg.ema_halflife_nanos <= 0) {
        fail(Errc::InvalidArgument, "EMA half-life must be positive");
    }
    ClfDecision d;
    TimeEma ema_c(cfg.ema_halflife_nanos);
    TimeEma ema_n(cfg.ema_halflife_nanos);
    for (const auto& r : records) {
        if (r.skip) {
            ++d.skipped;
            continue;
        }
        ++d.used;
        ema_c.update(r.ts_nanos, r.clf_c);
        ema_n.update(r.ts_nanos, r.clf_n);
        if (r.raw_pick == Leg::Current) {
            ++d.votes_c;
        } else {
            ++d.votes_n;
        }
    }
    if (d.used == 0) {
        d.reference = cfg.fallback;
        d.fallback = true;
        return d;
    }
    d.smoothed_c = ema_c.value();
    d.smoothed_n = ema_n.value();
    if (cfg.mode == VoteMode::Ema) {
        d.reference = d.smoothed_n <= d.smoothed_c ? Leg::Next : Leg::Current;
    } else {
        d.reference = d.votes_c > d.votes_n ? Leg::Current : Leg::Next;
    }
    return d;
}

} // namespace calspread
