#pragma once

#include "calspread/benchmark.hpp"
#include "calspread/error.hpp"
#include "calspread/hawkes/model.hpp"
#include "calspread/hawkes/simulate.hpp"
#include "calspread/leg.hpp"
#include "calspread/price.hpp"
#include "calspread/rng.hpp"
#include "calspread/tickstore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace calspread::synth {

/// Generator dimensions: the six reference-impacting types plus other flow per side.
enum Dim : std::size_t { TA = 0, TB, CA, CB, PDMA, PDMB, OA, OB, kDims };

inline hawkes::HawkesModel poisson_generator(const std::array<double, kDims>& rates) {
    Eigen::VectorXd mu(kDims);
    for (std::size_t i = 0; i < kDims; ++i) {
        mu(static_cast<Eigen::Index>(i)) = rates[i];
    }
    return hawkes::poisson_model(mu, hawkes::all_events_index());
}

/// Poisson baseline plus diagonal self-excitation with branching `self_branching`
/// and decay `beta` (1/s) on every dimension.
inline hawkes::HawkesModel self_exciting_generator(const std::array<double, kDims>& rates, double self_branching,
                                                   double beta) {
    auto m = poisson_generator(rates);
    auto& k = std::get<hawkes::ExponentialKernel>(m.kernel);
    k.beta.setConstant(beta);
    for (std::size_t i = 0; i < kDims; ++i) {
        k.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = self_branching * beta;
    }
    return m;
}

struct ContractSpec {
    std::string symbol;
    Price start_bid = Price::from_raw(174'550'000);
    hawkes::HawkesModel generator = poisson_generator({});
    std::size_t levels = 5;        // nu; the book keeps at least nu + 1 levels per side
    std::size_t max_levels = 11;
    std::int64_t lot_size = 50;
    std::int64_t min_lots = 1;
    std::int64_t max_lots = 4;
    std::int64_t max_gap_ticks = 3; // spacing between adjacent levels, uniform in 1..max
};

struct SynthConfig {
    double duration_s = 60.0;
    std::int64_t start_nanos = 1'644'224'400'000'000'000LL; // 2022-02-07 09:00:00 UTC
    Price tick = Price::from_raw(500);
    ContractSpec current{"NSEFNO_NIFTY_G22"};
    ContractSpec next{"NSEFNO_NIFTY_H22", Price::from_raw(175'142'000)};
    std::uint64_t seed = 42;
    std::size_t max_events = 5'000'000;
};

struct GeneratorEvent {
    std::int64_t ts_nanos = 0;
    Leg contract = Leg::Current;
    Dim dim = OA;
};

/// Event times and types drawn from both generators, merged in time order.
struct Timeline {
    std::vector<GeneratorEvent> events;
    bool capped = false;
};

/// Zeroes the rates that would create natural rollover-direction trades
/// (F_c sell-aggressor, F_n buy-aggressor), so only planted trades can pair.
inline hawkes::HawkesModel without_dims(hawkes::HawkesModel m, std::initializer_list<Dim> dims) {
    for (Dim d : dims) {
        const auto i = static_cast<Eigen::Index>(d);
        m.mu(i) = 0.0;
        std::visit(
            [&](auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, hawkes::ExponentialKernel>) {
                    k.alpha.row(i).setZero();
                } else if constexpr (std::is_same_v<K, hawkes::SumExponentialKernel>) {
                    for (auto& a : k.alpha) {
                        a.row(i).setZero();
                    }
                } else {
                    for (auto& v : k.values) {
                        v.row(i).setZero();
                    }
                }
            },
            m.kernel);
    }
    return m;
}

inline Timeline simulate_timeline(const SynthConfig& cfg, bool suppress_rollover_trades = false) {
    if (!(cfg.duration_s > 0.0)) {
        fail(Errc::InvalidArgument, "synthetic duration must be positive");
    }
    Timeline tl;
    for (Leg leg : {Leg::Current, Leg::Next}) {
        const auto& spec = leg == Leg::Current ? cfg.current : cfg.next;
        if (spec.generator.dim() != kDims) {
            fail(Errc::InvalidArgument, "synthetic generator must have 8 dimensions");
        }
        if (hawkes::branching_ratio(spec.generator) >= 1.0) {
            fail(Errc::InvalidArgument, "synthetic generator for " + spec.symbol + " is not stable");
        }
        hawkes::HawkesModel gen = spec.generator;
        if (suppress_rollover_trades) {
            gen = without_dims(std::move(gen), {leg == Leg::Current ? TB : TA});
        }
        const auto path = hawkes::simulate_thinning(gen, hawkes::EventSeries{}, cfg.duration_s,
                                                    derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(leg)}),
                                                    {cfg.max_events});
        tl.capped = tl.capped || path.capped;
        for (std::size_t d = 0; d < kDims; ++d) {
            for (double t : path.times[d]) {
                tl.events.push_back({cfg.start_nanos + std::llround(t * 1e9), leg, static_cast<Dim>(d)});
            }
        }
    }
    std::stable_sort(tl.events.begin(), tl.events.end(), [](const GeneratorEvent& a, const GeneratorEvent& b) {
        return a.ts_nanos != b.ts_nanos ? a.ts_nanos < b.ts_nanos : a.contract < b.contract;
    });
    if (tl.capped) {
        fail(Errc::InvalidArgument, "synthetic generator hit the event cap (ExplosionCap)");
    }
    return tl;
}

/// Oracle plan driven by realized slippage risk: reference = F_n (1) when F_c's
/// ask saw at least as many reference-impacting events as F_n's bid in the window.
inline std::vector<Decision> slippage_plan(const Timeline& tl, const WindowGrid& grid) {
    const std::size_t n = grid.size();
    std::vector<std::int64_t> c_ask(n, 0);
    std::vector<std::int64_t> n_bid(n, 0);
    for (const auto& ev : tl.events) {
        if (ev.ts_nanos < grid.start_nanos) {
            continue;
        }
        const auto k = static_cast<std::size_t>((ev.ts_nanos - grid.start_nanos) / grid.step_nanos);
        if (k >= n || !grid.at(k).contains(ev.ts_nanos)) {
            continue;
        }
        if (ev.contract == Leg::Current && (ev.dim == TA || ev.dim == CA || ev.dim == PDMA)) {
            ++c_ask[k];
        } else if (ev.contract == Leg::Next && (ev.dim == TB || ev.dim == CB || ev.dim == PDMB)) {
            ++n_bid[k];
        }
    }
    std::vector<Decision> plan(n);
    for (std::size_t k = 0; k < n; ++k) {
        plan[k] = c_ask[k] >= n_bid[k] ? 1 : 0;
    }
    return plan;
}

namespace detail {

/// One-order-per-level book that emits tick-file rows for every action.
class Market {
public:
    Market(const ContractSpec& spec, Price tick, SymbolId symbol, std::uint64_t oid_base, Rng& rng)
        : spec_(spec), tick_(tick), symbol_(symbol), next_oid_(oid_base), rng_(rng) {}

    void seed_ladders(std::int64_t ts, std::vector<TickEvent>& out) {
        Price bid = spec_.start_bid;
        Price ask = spec_.start_bid + tick_ * rng_.uniform_int(1, spec_.max_gap_ticks);
        for (std::size_t k = 0; k <= spec_.levels; ++k) {
            emit_new(ts, Side::Bid, bid, out);
            emit_new(ts, Side::Ask, ask, out);
            bid -= tick_ * rng_.uniform_int(1, spec_.max_gap_ticks);
            ask += tick_ * rng_.uniform_int(1, spec_.max_gap_ticks);
        }
    }

    [[nodiscard]] Price best(Side s) const { return s == Side::Bid ? bids_.begin()->first : asks_.begin()->first; }
    [[nodiscard]] std::int64_t touch_qty(Side s) const {
        return s == Side::Bid ? bids_.begin()->second.qty : asks_.begin()->second.qty;
    }

    /// Aggressor `agg` trades against the touch on the opposite side. `full`
    /// consumes the whole resting order.
    Price trade(std::int64_t ts, Aggressor agg, bool full, std::vector<TickEvent>& out) {
        const Side resting = agg == Aggressor::Buy ? Side::Ask : Side::Bid;
        auto& touch = level_begin(resting);
        const Price price = touch.first;
        const std::int64_t lots = touch.second.qty / spec_.lot_size;
        const std::int64_t qty = full ? touch.second.qty : rng_.uniform_int(1, std::max<std::int64_t>(1, lots)) *
                                                               spec_.lot_size;
        TickEvent ev = base(ts, EventKind::Trade, Side::Unknown, price, std::min(qty, touch.second.qty));
        const std::uint64_t aggressor_oid = next_oid_++;
        ev.oid1 = agg == Aggressor::Buy ? aggressor_oid : touch.second.oid;
        ev.oid2 = agg == Aggressor::Buy ? touch.second.oid : aggressor_oid;
        ev.aggressor = agg;
        out.push_back(ev);
        touch.second.qty -= ev.qty;
        if (touch.second.qty <= 0) {
            erase_touch(resting);
            replenish(ts, resting, out);
        }
        return price;
    }

    void cancel_touch(std::int64_t ts, Side s, std::vector<TickEvent>& out) {
        const auto& touch = level_begin(s);
        TickEvent ev = base(ts, EventKind::Cancel, s, touch.first, touch.second.qty);
        ev.oid1 = touch.second.oid;
        out.push_back(ev);
        erase_touch(s);
        replenish(ts, s, out);
    }

    /// Moves the touch order away from the top to the first free slot behind it.
    void worsen_touch(std::int64_t ts, Side s, std::vector<TickEvent>& out) {
        const auto touch = level_begin(s);
        Price p = touch.first;
        do {
            p = away(s, p, 1);
        } while (occupied(s, p));
        erase_touch(s);
        TickEvent ev = base(ts, EventKind::Modify, s, p, touch.second.qty);
        ev.oid1 = touch.second.oid;
        out.push_back(ev);
        insert(s, p, touch.second);
    }

    void other(std::int64_t ts, Side s, std::vector<TickEvent>& out) {
        const std::int64_t spread_ticks = (best(Side::Ask) - best(Side::Bid)).raw() / tick_.raw();
        const double p_inside = std::min(1.0, 0.5 * static_cast<double>(spread_ticks - 1));
        if (spread_ticks >= 2 && rng_.bernoulli(p_inside)) {
            // New order strictly inside the spread, at most max_gap_ticks ahead of the touch.
            const std::int64_t k = rng_.uniform_int(1, std::min(spread_ticks - 1, spec_.max_gap_ticks));
            const Price p = s == Side::Bid ? best(Side::Bid) + tick_ * k : best(Side::Ask) - tick_ * k;
            emit_new(ts, s, p, out);
            return;
        }
        const std::size_t depth = levels(s);
        const auto action = rng_.uniform_int(0, 2);
        if (action == 0 && depth < spec_.max_levels) {
            // New order in a free slot behind the touch.
            const Price back = last(s);
            Price p = away(s, best(s), rng_.uniform_int(1, 1 + std::abs((back - best(s)).raw()) / tick_.raw()));
            while (occupied(s, p)) {
                p = away(s, p, 1);
            }
            emit_new(ts, s, p, out);
        } else if (action == 1 && depth > spec_.levels + 1) {
            const auto [p, order] = pick_deep(s);
            TickEvent ev = base(ts, EventKind::Cancel, s, p, order.qty);
            ev.oid1 = order.oid;
            out.push_back(ev);
            erase(s, p);
        } else {
            // Quantity change at an unchanged deep price.
            auto [p, order] = pick_deep(s);
            order.qty = rng_.uniform_int(spec_.min_lots, spec_.max_lots) * spec_.lot_size;
            TickEvent ev = base(ts, EventKind::Modify, s, p, order.qty);
            ev.oid1 = order.oid;
            out.push_back(ev);
            erase(s, p);
            insert(s, p, order);
        }
    }

private:
    struct Order {
        std::uint64_t oid;
        std::int64_t qty;
    };
    using Ladder = std::map<Price, Order>; // ascending; bids read from the back

    TickEvent base(std::int64_t ts, EventKind kind, Side s, Price p, std::int64_t qty) const {
        TickEvent ev;
        ev.ts_nanos = ts;
        ev.symbol = symbol_;
        ev.kind = kind;
        ev.side = s;
        ev.price = p;
        ev.qty = qty;
        return ev;
    }

    std::pair<const Price, Order>& level_begin(Side s) {
        return s == Side::Bid ? *bids_.begin() : *asks_.begin();
    }

    [[nodiscard]] std::size_t levels(Side s) const { return s == Side::Bid ? bids_.size() : asks_.size(); }
    [[nodiscard]] Price last(Side s) const { return s == Side::Bid ? bids_.rbegin()->first : asks_.rbegin()->first; }
    [[nodiscard]] bool occupied(Side s, Price p) const { return s == Side::Bid ? bids_.count(p) : asks_.count(p); }
    [[nodiscard]] Price away(Side s, Price p, std::int64_t ticks) const {
        return s == Side::Bid ? p - tick_ * ticks : p + tick_ * ticks;
    }

    void insert(Side s, Price p, Order o) {
        if (s == Side::Bid) {
            bids_.emplace(p, o);
        } else {
            asks_.emplace(p, o);
        }
    }
    void erase(Side s, Price p) {
        if (s == Side::Bid) {
            bids_.erase(p);
        } else {
            asks_.erase(p);
        }
    }
    void erase_touch(Side s) {
        if (s == Side::Bid) {
            bids_.erase(bids_.begin());
        } else {
            asks_.erase(asks_.begin());
        }
    }

    std::pair<Price, Order> pick_deep(Side s) {
        const std::size_t depth = levels(s);
        const auto k = static_cast<std::size_t>(rng_.uniform_int(1, static_cast<std::int64_t>(depth) - 1));
        if (s == Side::Bid) {
            auto it = std::next(bids_.begin(), static_cast<std::ptrdiff_t>(k));
            return {it->first, it->second};
        }
        auto it = std::next(asks_.begin(), static_cast<std::ptrdiff_t>(k));
        return {it->first, it->second};
    }

    void emit_new(std::int64_t ts, Side s, Price p, std::vector<TickEvent>& out) {
        const Order o{next_oid_++, rng_.uniform_int(spec_.min_lots, spec_.max_lots) * spec_.lot_size};
        TickEvent ev = base(ts, EventKind::New, s, p, o.qty);
        ev.oid1 = o.oid;
        out.push_back(ev);
        insert(s, p, o);
    }

    void replenish(std::int64_t ts, Side s, std::vector<TickEvent>& out) {
        while (levels(s) < spec_.levels + 1) {
            emit_new(ts, s, away(s, last(s), rng_.uniform_int(1, spec_.max_gap_ticks)), out);
        }
    }

    const ContractSpec& spec_;
    Price tick_;
    SymbolId symbol_;
    std::uint64_t next_oid_;
    Rng& rng_;
    std::map<Price, Order, std::greater<>> bids_;
    Ladder asks_;
};

inline void apply_natural(Market& m, const GeneratorEvent& ev, std::vector<TickEvent>& out, Rng& rng) {
    switch (ev.dim) {
    case TA: m.trade(ev.ts_nanos, Aggressor::Buy, rng.bernoulli(0.5), out); break;
    case TB: m.trade(ev.ts_nanos, Aggressor::Sell, rng.bernoulli(0.5), out); break;
    case CA: m.cancel_touch(ev.ts_nanos, Side::Ask, out); break;
    case CB: m.cancel_touch(ev.ts_nanos, Side::Bid, out); break;
    case PDMA: m.worsen_touch(ev.ts_nanos, Side::Ask, out); break;
    case PDMB: m.worsen_touch(ev.ts_nanos, Side::Bid, out); break;
    case OA: m.other(ev.ts_nanos, Side::Ask, out); break;
    case OB: m.other(ev.ts_nanos, Side::Bid, out); break;
    default: break;
    }
}

} // namespace detail

struct SynthMarket {
    TickStream current;
    TickStream next;
    std::vector<Decision> expected_oracle; // per oracle window; empty without a plan
    std::size_t planted_pairs = 0;
    std::size_t decoys = 0;
};

struct PlantOptions {
    WindowGrid grid;                            // oracle windows
    std::int64_t leg_gap_nanos = 1'000'000;     // between the two legs of a pair
    std::int64_t pair_spacing_nanos = 3'000'000; // primary's second leg to decoy's first leg
    bool decoys = true;
    PairingConfig pairing;
};

/// Realizes a timeline as book-consistent rows. With a plan, one primary
/// rollover pair per decided window realizes the planted first leg, and an
/// optional decoy pair of the opposite orientation is added only when its
/// spread is strictly higher than the primary's.
inline SynthMarket realize(const SynthConfig& cfg, const Timeline& tl, std::span<const Decision> plan = {},
                           const PlantOptions& opt = {}) {
    SynthMarket out;
    out.current.symbols = {cfg.current.symbol};
    out.next.symbols = {cfg.next.symbol};
    Rng rng(derive_seed(cfg.seed, {2}));
    Rng plant_rng(derive_seed(cfg.seed, {3}));
    detail::Market mc(cfg.current, cfg.tick, 0, 1'100'000'000'000'001ULL, rng);
    detail::Market mn(cfg.next, cfg.tick, 0, 1'200'000'000'000'001ULL, rng);
    auto& rows_c = out.current.events;
    auto& rows_n = out.next.events;
    mc.seed_ladders(cfg.start_nanos, rows_c);
    mn.seed_ladders(cfg.start_nanos, rows_n);

    // Planted blocks: [start, end] intervals with the decision to realize.
    struct Block {
        std::int64_t start;
        std::int64_t end;
        Leg first;
        std::size_t window;
    };
    std::vector<Block> blocks;
    if (!plan.empty()) {
        if (plan.size() != opt.grid.size()) {
            fail(Errc::InvalidArgument, "plan length does not match the oracle grid");
        }
        if (opt.leg_gap_nanos > opt.pairing.max_critical_interval_nanos) {
            fail(Errc::InfeasiblePlan, "leg gap exceeds the critical interval, planted pairs would not match");
        }
        const std::int64_t span = 2 * opt.leg_gap_nanos + opt.pair_spacing_nanos;
        if (opt.grid.width_nanos < 2 * span) {
            fail(Errc::InfeasiblePlan, "oracle window of " + std::to_string(opt.grid.width_nanos) +
                                           " ns is too short for a planted pair and decoy");
        }
        out.expected_oracle.assign(plan.begin(), plan.end());
        for (std::size_t k = 0; k < plan.size(); ++k) {
            if (!plan[k]) {
                continue;
            }
            const Window w = opt.grid.at(k);
            const std::int64_t slack = w.end - w.begin - 2 * span;
            const std::int64_t start = w.begin + span / 2 + plant_rng.uniform_int(0, slack);
            blocks.push_back({start, start + span, *plan[k] ? Leg::Current : Leg::Next, k});
        }
    }

    auto plant = [&](const Block& b) {
        auto leg_trade = [&](Leg leg, std::int64_t ts) {
            return leg == Leg::Current ? mc.trade(ts, Aggressor::Sell, true, rows_c)
                                       : mn.trade(ts, Aggressor::Buy, true, rows_n);
        };
        const Leg second = b.first == Leg::Current ? Leg::Next : Leg::Current;
        const Price p1 = leg_trade(b.first, b.start);
        const Price p2 = leg_trade(second, b.start + opt.leg_gap_nanos);
        const Price primary = b.first == Leg::Next ? p1 - p2 : p2 - p1;
        ++out.planted_pairs;
        if (!opt.decoys) {
            return;
        }
        // Decoy: opposite orientation, kept only if strictly more expensive.
        const std::int64_t t3 = b.start + opt.leg_gap_nanos + opt.pair_spacing_nanos;
        const Price decoy = mn.best(Side::Ask) - mc.best(Side::Bid);
        if (decoy > primary) {
            leg_trade(second, t3);
            leg_trade(b.first, t3 + opt.leg_gap_nanos);
            ++out.decoys;
        }
    };

    std::size_t next_block = 0;
    std::int64_t hold_until = std::numeric_limits<std::int64_t>::min();
    for (const auto& ev : tl.events) {
        while (next_block < blocks.size() && blocks[next_block].start <= ev.ts_nanos) {
            plant(blocks[next_block]);
            hold_until = blocks[next_block].end;
            ++next_block;
        }
        GeneratorEvent e = ev;
        e.ts_nanos = std::max(e.ts_nanos, hold_until); // natural flow waits for the planted block
        if (e.contract == Leg::Current) {
            detail::apply_natural(mc, e, rows_c, rng);
        } else {
            detail::apply_natural(mn, e, rows_n, rng);
        }
    }
    while (next_block < blocks.size()) {
        plant(blocks[next_block++]);
    }
    return out;
}

inline SynthMarket generate_market(const SynthConfig& cfg) { return realize(cfg, simulate_timeline(cfg)); }

/// Market whose oracle series equals `planted` (nullopt windows get no pair).
inline SynthMarket generate_labeled_pairs(const SynthConfig& cfg, std::span<const Decision> planted,
                                          const PlantOptions& opt) {
    const auto tl = simulate_timeline(cfg, true);
    return realize(cfg, tl, planted, opt);
}

/// Labeled market whose plan follows realized reference-event pressure
/// (see slippage_plan).
inline SynthMarket generate_slippage_market(const SynthConfig& cfg, const PlantOptions& opt) {
    const auto tl = simulate_timeline(cfg, true);
    const auto plan = slippage_plan(tl, opt.grid);
    return realize(cfg, tl, plan, opt);
}

inline void write_market(const std::string& path_current, const std::string& path_next, const SynthMarket& m) {
    for (const auto& [path, stream] : {std::pair{path_current, &m.current}, std::pair{path_next, &m.next}}) {
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            fail(Errc::Io, "cannot write '" + path + "'");
        }
        write_ticks(f, *stream);
    }
}

} // namespace calspread::synth
