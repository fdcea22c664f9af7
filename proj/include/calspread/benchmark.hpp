#pragma once

#include "calspread/error.hpp"
#include "calspread/leg.hpp"
#include "calspread/price.hpp"
#include "calspread/tickstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace calspread {

// ---------------------------------------------------------------------------
// Passive-aggressive trade pairs and the market oracle
// ---------------------------------------------------------------------------

struct PairingConfig {
    std::int64_t max_critical_interval_nanos = 10'000'000; // 10 ms
};

struct TradePair {
    std::int64_t t1 = 0; // earlier trade
    std::int64_t t2 = 0; // later trade
    Leg first_leg = Leg::Current;
    Price passive_price;    // price of the first trade
    Price aggressive_price; // price of the second trade
    Price realized_spread;  // F_n trade price minus F_c trade price

    bool operator==(const TradePair&) const = default;
};

/// A trade usable for pairing: F_c sold (sell aggressor) or F_n bought (buy aggressor).
struct PairCandidate {
    std::int64_t ts = 0;
    Leg leg = Leg::Current;
    Price price;

    bool operator==(const PairCandidate&) const = default;
};

inline bool rollover_trade(const TickEvent& ev, Leg leg) {
    if (ev.kind != EventKind::Trade || !ev.aggressor) {
        return false;
    }
    return leg == Leg::Current ? *ev.aggressor == Aggressor::Sell : *ev.aggressor == Aggressor::Buy;
}

/// Rollover-direction trades of both contracts merged in time order; on equal
/// timestamps F_c comes first.
inline std::vector<PairCandidate> pair_candidates(std::span<const TickEvent> events_c,
                                                  std::span<const TickEvent> events_n) {
    std::vector<PairCandidate> out;
    for (const auto& ev : events_c) {
        if (rollover_trade(ev, Leg::Current)) {
            out.push_back({ev.ts_nanos, Leg::Current, ev.price});
        }
    }
    for (const auto& ev : events_n) {
        if (rollover_trade(ev, Leg::Next)) {
            out.push_back({ev.ts_nanos, Leg::Next, ev.price});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const PairCandidate& a, const PairCandidate& b) {
        return a.ts != b.ts ? a.ts < b.ts : a.leg < b.leg;
    });
    return out;
}

inline TradePair make_pair(const PairCandidate& first, const PairCandidate& second) {
    TradePair p;
    p.t1 = first.ts;
    p.t2 = second.ts;
    p.first_leg = first.leg;
    p.passive_price = first.price;
    p.aggressive_price = second.price;
    const Price n_price = first.leg == Leg::Next ? first.price : second.price;
    const Price c_price = first.leg == Leg::Current ? first.price : second.price;
    p.realized_spread = n_price - c_price;
    return p;
}

/// Greedy earliest-first matching over time-ordered candidates: each unmatched
/// trade takes the earliest later unmatched trade on the other contract within
/// the critical interval.
inline std::vector<TradePair> match_pairs(std::span<const PairCandidate> cands, const PairingConfig& cfg = {}) {
    std::vector<TradePair> out;
    std::vector<bool> used(cands.size(), false);
    for (std::size_t a = 0; a < cands.size(); ++a) {
        if (used[a]) {
            continue;
        }
        for (std::size_t b = a + 1; b < cands.size(); ++b) {
            if (cands[b].ts - cands[a].ts > cfg.max_critical_interval_nanos) {
                break;
            }
            if (!used[b] && cands[b].leg != cands[a].leg) {
                used[a] = used[b] = true;
                out.push_back(make_pair(cands[a], cands[b]));
                break;
            }
        }
    }
    return out;
}

inline std::vector<TradePair> extract_trade_pairs(std::span<const TickEvent> events_c,
                                                  std::span<const TickEvent> events_n, const Window& w,
                                                  const PairingConfig& cfg = {}) {
    auto in_window = [&](std::span<const TickEvent> evs) {
        std::vector<TickEvent> out;
        for (const auto& ev : evs) {
            if (w.contains(ev.ts_nanos)) {
                out.push_back(ev);
            }
        }
        return out;
    };
    const auto c = in_window(events_c);
    const auto n = in_window(events_n);
    const auto cands = pair_candidates(c, n);
    return match_pairs(cands, cfg);
}

using Decision = std::optional<std::uint8_t>;

/// chi^m: 1 when the lowest-spread pair started on F_c. Equal spreads resolve to the earliest pair.
inline Decision oracle_decision(std::span<const TradePair> pairs) {
    if (pairs.empty()) {
        return std::nullopt;
    }
    const TradePair* best = &pairs[0];
    for (const auto& p : pairs) {
        if (p.realized_spread < best->realized_spread ||
            (p.realized_spread == best->realized_spread && p.t1 < best->t1)) {
            best = &p;
        }
    }
    return best->first_leg == Leg::Current ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Agreement and forecast loss
// ---------------------------------------------------------------------------

struct DecisionSeries {
    std::string rule;
    std::vector<Decision> values;
};

struct Agreement {
    double score = 0.0;
    std::size_t scored = 0;
};

inline Agreement agreement_score(std::span<const Decision> chi, std::span<const Decision> chi_m) {
    if (chi.size() != chi_m.size()) {
        fail(Errc::InvalidArgument, "decision series are not on the same grid");
    }
    Agreement a;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < chi.size(); ++k) {
        if (chi[k] && chi_m[k]) {
            ++a.scored;
            hits += *chi[k] == *chi_m[k] ? 1 : 0;
        }
    }
    if (a.scored == 0) {
        fail(Errc::NoOverlap, "no window is scored by both series");
    }
    a.score = static_cast<double>(hits) / static_cast<double>(a.scored);
    return a;
}

inline Agreement agreement_score(const DecisionSeries& chi, const DecisionSeries& chi_m) {
    return agreement_score(std::span<const Decision>(chi.values), std::span<const Decision>(chi_m.values));
}

/// -log P(realized) under the simulated count distribution with additive
/// smoothing eps over the support {0, ..., max simulated + 1}; realized counts
/// above the support are scored at its top cell.
inline double loglik_loss(std::int64_t realized, std::span<const std::int64_t> samples, double eps = 1.0) {
    if (samples.empty()) {
        fail(Errc::InvalidArgument, "loss needs at least one simulated count");
    }
    const std::int64_t top = *std::max_element(samples.begin(), samples.end()) + 1;
    const std::int64_t cell = std::clamp<std::int64_t>(realized, 0, top);
    const auto hits = std::count(samples.begin(), samples.end(), cell);
    const double support = static_cast<double>(top + 1);
    const double p = (static_cast<double>(hits) + eps) / (static_cast<double>(samples.size()) + eps * support);
    return -std::log(p);
}

} // namespace calspread
