#pragma once

#include "calspread/benchmark.hpp"
#include "calspread/clf.hpp"
#include "calspread/error.hpp"
#include "calspread/hawkes.hpp"
#include "calspread/leg.hpp"
#include "calspread/lob.hpp"
#include "calspread/spa.hpp"
#include "calspread/tickstore.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace calspread {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string current_path;
    std::string next_path;
    std::string current_symbol; // empty: the file must hold a single symbol
    std::string next_symbol;
    ParseOptions parse;
    std::size_t book_depth = 5;

    std::int64_t lookback_nanos = 1'000'000'000; // fit window h
    std::int64_t step_nanos = 10'000'000;
    std::int64_t window_nanos = 10'000'000;
    std::int64_t horizon_nanos = 10'000'000; // xi
    std::int64_t oracle_window_nanos = 60'000'000'000;
    std::optional<std::int64_t> start_nanos; // default: first common timestamp + lookback
    std::size_t max_windows = 0;             // 0: no cap

    std::vector<hawkes::KernelKind> kernels{hawkes::KernelKind::Exponential, hawkes::KernelKind::SumExponential,
                                            hawkes::KernelKind::Discretized};
    hawkes::KernelKind decision_kernel = hawkes::KernelKind::Discretized;
    hawkes::FitConfig fit;
    std::size_t n_sims = 200;
    bool ratio_of_means = true;
    std::size_t max_sim_events = 100'000;
    double loss_eps = 1.0;

    ClfVoteConfig clf;
    PairingConfig pairing;
    SpaConfig spa;

    std::uint64_t seed = 42;
    std::string out_dir = "run";
    std::size_t threads = 1;
    bool dump_snapshots = false;
};

namespace detail {

inline std::int64_t ms_to_nanos(double ms) { return std::llround(ms * 1e6); }

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys{
        "current_path", "next_path", "current_symbol", "next_symbol", "tick_size", "jitter_tolerance_nanos",
        "book_depth", "lookback_ms", "step_ms", "window_ms", "horizon_ms", "oracle_window_ms", "start_ns",
        "windows", "kernels", "decision_kernel", "fit", "n_sims", "ratio_of_means", "max_sim_events", "loss_eps",
        "clf", "max_critical_interval_ms", "spa", "seed", "out_dir", "threads", "dump_snapshots"};
    return keys;
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        fail(Errc::Config, where + " must be a JSON object");
    }
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) {
            fail(Errc::Config, "unknown key '" + k + "' in " + where);
        }
    }
}

} // namespace detail

/// Relative paths resolve against `base_dir` (the config file's directory).
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    using detail::ms_to_nanos;
    detail::check_keys(j, detail::config_keys(), "config");
    RunConfig c;
    try {
        auto path = [&](const char* key) -> std::string {
            if (!j.contains(key)) {
                return {};
            }
            std::filesystem::path p = j.at(key).get<std::string>();
            return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
        };
        c.current_path = path("current_path");
        c.next_path = path("next_path");
        c.current_symbol = j.value("current_symbol", c.current_symbol);
        c.next_symbol = j.value("next_symbol", c.next_symbol);
        if (j.contains("tick_size")) {
            c.parse.tick_size = Price::parse_or_throw(j.at("tick_size").get<std::string>());
        }
        c.parse.jitter_tolerance_nanos = j.value("jitter_tolerance_nanos", c.parse.jitter_tolerance_nanos);
        c.book_depth = j.value("book_depth", c.book_depth);
        c.lookback_nanos = ms_to_nanos(j.value("lookback_ms", 1000.0));
        c.step_nanos = ms_to_nanos(j.value("step_ms", 10.0));
        c.window_nanos = ms_to_nanos(j.value("window_ms", 10.0));
        c.horizon_nanos = ms_to_nanos(j.value("horizon_ms", 10.0));
        c.oracle_window_nanos = ms_to_nanos(j.value("oracle_window_ms", 60000.0));
        if (j.contains("start_ns")) {
            c.start_nanos = j.at("start_ns").get<std::int64_t>();
        }
        c.max_windows = j.value("windows", c.max_windows);
        if (j.contains("kernels")) {
            c.kernels.clear();
            for (const auto& k : j.at("kernels")) {
                c.kernels.push_back(hawkes::kernel_kind_from_string(k.get<std::string>()));
            }
        }
        if (j.contains("decision_kernel")) {
            c.decision_kernel = hawkes::kernel_kind_from_string(j.at("decision_kernel").get<std::string>());
        }
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            detail::check_keys(f, {"max_iters", "tolerance", "sumexp_betas", "em_bins", "em_support_ms",
                                   "em_max_iters"},
                               "fit");
            c.fit.max_iters = f.value("max_iters", c.fit.max_iters);
            c.fit.tolerance = f.value("tolerance", c.fit.tolerance);
            c.fit.sumexp_betas = f.value("sumexp_betas", c.fit.sumexp_betas);
            c.fit.em_bins = f.value("em_bins", c.fit.em_bins);
            c.fit.em_support = f.value("em_support_ms", c.fit.em_support * 1e3) / 1e3;
            c.fit.em_max_iters = f.value("em_max_iters", c.fit.em_max_iters);
        }
        c.n_sims = j.value("n_sims", c.n_sims);
        c.ratio_of_means = j.value("ratio_of_means", c.ratio_of_means);
        c.max_sim_events = j.value("max_sim_events", c.max_sim_events);
        c.loss_eps = j.value("loss_eps", c.loss_eps);
        if (j.contains("clf")) {
            const auto& f = j.at("clf");
            detail::check_keys(f, {"depth", "vote_window_ms", "halflife_ms", "mode"}, "clf");
            c.clf.depth = f.value("depth", c.clf.depth);
            c.clf.vote_window_nanos = ms_to_nanos(f.value("vote_window_ms", 1000.0));
            c.clf.ema_halflife_nanos = ms_to_nanos(f.value("halflife_ms", 200.0));
            const auto mode = f.value("mode", std::string("ema"));
            if (mode != "ema" && mode != "majority") {
                fail(Errc::Config, "clf.mode must be 'ema' or 'majority'");
            }
            c.clf.mode = mode == "ema" ? VoteMode::Ema : VoteMode::Majority;
        }
        c.pairing.max_critical_interval_nanos = ms_to_nanos(j.value("max_critical_interval_ms", 10.0));
        if (j.contains("spa")) {
            const auto& f = j.at("spa");
            detail::check_keys(f, {"resamples", "mean_block", "seed"}, "spa");
            c.spa.resamples = f.value("resamples", c.spa.resamples);
            c.spa.mean_block = f.value("mean_block", c.spa.mean_block);
            c.spa.seed = f.value("seed", c.spa.seed);
        }
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("out_dir") && !base_dir.empty() && std::filesystem::path(c.out_dir).is_relative()) {
            c.out_dir = (base_dir / c.out_dir).string();
        }
        c.threads = j.value("threads", c.threads);
        c.dump_snapshots = j.value("dump_snapshots", c.dump_snapshots);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::Config, std::string("bad config value: ") + e.what());
    }
    return c;
}

inline void validate(const RunConfig& c) {
    if (c.lookback_nanos <= 0 || c.step_nanos <= 0 || c.window_nanos <= 0 || c.horizon_nanos <= 0 ||
        c.oracle_window_nanos <= 0) {
        fail(Errc::Config, "lookback, step, window, horizon and oracle window must be positive");
    }
    if (c.horizon_nanos > c.step_nanos) {
        fail(Errc::Config, "forecast horizon longer than the step would overlap windows");
    }
    if (c.clf.depth < 1 || c.clf.depth > kClfDepths) {
        fail(Errc::Config, "clf depth must be in 1..4");
    }
    if (c.clf.ema_halflife_nanos <= 0 || c.clf.vote_window_nanos <= 0) {
        fail(Errc::Config, "clf vote window and half-life must be positive");
    }
    if (c.kernels.empty()) {
        fail(Errc::Config, "at least one kernel is required");
    }
    if (c.n_sims == 0) {
        fail(Errc::Config, "n_sims must be positive");
    }
    if (c.book_depth < kClfDepths + 1) {
        fail(Errc::Config, "book depth must cover CLF depth 4 (at least 5 levels)");
    }
}

/// Maps an error to the CLI exit code: 1 config, 2 data, 3 numerical.
inline int exit_code(Errc e) {
    switch (e) {
    case Errc::Config:
    case Errc::InvalidArgument: return 1;
    case Errc::Diverged:
    case Errc::NonMonotoneEM:
    case Errc::DegenerateVariance:
    case Errc::NonPositiveNumerator:
    case Errc::NonPositiveQuote:
    case Errc::DegenerateDepth: return 3;
    default: return 2;
    }
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct MarketData {
    TickStream current;
    TickStream next;
};

inline TickStream select_symbol(TickStream s, const std::string& symbol, const std::string& path) {
    if (!symbol.empty()) {
        if (!s.find(symbol)) {
            fail(Errc::Config, "symbol '" + symbol + "' not found in '" + path + "'");
        }
        return s.filter(symbol);
    }
    if (s.symbols.size() > 1) {
        fail(Errc::Config, "'" + path + "' holds several symbols; set the contract symbol in the config");
    }
    return s;
}

inline MarketData load_market(const RunConfig& c) {
    if (c.current_path.empty() || c.next_path.empty()) {
        fail(Errc::Config, "config needs current_path and next_path");
    }
    MarketData m;
    m.current = select_symbol(parse_tick_file(c.current_path, c.parse), c.current_symbol, c.current_path);
    m.next = select_symbol(parse_tick_file(c.next_path, c.parse), c.next_symbol, c.next_path);
    return m;
}

struct ClassifiedMarket {
    std::vector<ClassifiedEvent> current;
    std::vector<ClassifiedEvent> next;
    ClassifyStats stats_c;
    ClassifyStats stats_n;
};

inline ClassifiedMarket classify_market(const MarketData& m, std::size_t depth) {
    ClassifiedMarket out;
    out.current = classify_stream(m.current.events, depth, true, &out.stats_c);
    out.next = classify_stream(m.next.events, depth, true, &out.stats_n);
    return out;
}

/// Per-label counts in the layout of a ticks-per-day table.
struct IngestReport {
    std::array<std::size_t, 7> labels_c{};
    std::array<std::size_t, 7> labels_n{};
    std::array<std::size_t, 4> kinds_c{};
    std::array<std::size_t, 4> kinds_n{};
    ClassifyStats stats_c;
    ClassifyStats stats_n;
};

inline IngestReport ingest_report(const ClassifiedMarket& cm) {
    IngestReport r;
    for (const auto& ev : cm.current) {
        ++r.labels_c[static_cast<std::size_t>(ev.label)];
        ++r.kinds_c[static_cast<std::size_t>(ev.base.kind)];
    }
    for (const auto& ev : cm.next) {
        ++r.labels_n[static_cast<std::size_t>(ev.label)];
        ++r.kinds_n[static_cast<std::size_t>(ev.base.kind)];
    }
    r.stats_c = cm.stats_c;
    r.stats_n = cm.stats_n;
    return r;
}

// ---------------------------------------------------------------------------
// Per-window evaluation
// ---------------------------------------------------------------------------

inline constexpr std::array<std::size_t, 3> kAskRefDims{0, 2, 4}; // T_A, C_A, PDM_A
inline constexpr std::array<std::size_t, 3> kBidRefDims{1, 3, 5}; // T_B, C_B, PDM_B
inline constexpr std::array<std::size_t, 4> kAskAllDims{0, 2, 4, 6};
inline constexpr std::array<std::size_t, 4> kBidAllDims{1, 3, 5, 7};

/// Dimension of an event in the 6-D reference model, or in the 8-D all-events
/// model; nullopt when the event has no place in it.
inline std::optional<std::size_t> event_dim(const ClassifiedEvent& ev, bool all_events) {
    if (ev.label != Label::Other) {
        return static_cast<std::size_t>(ev.label);
    }
    if (!all_events) {
        return std::nullopt;
    }
    const Side s = book_side(ev.base);
    if (s == Side::Unknown) {
        return std::nullopt;
    }
    return s == Side::Ask ? 6 : 7;
}

/// Events in (origin - lookback, origin) as an EventSeries on [0, lookback]
/// (for fitting) or on [-lookback, 0) (as simulation history).
inline hawkes::EventSeries make_series(std::span<const ClassifiedEvent> events, std::int64_t origin,
                                       std::int64_t lookback, bool all_events, bool as_history) {
    hawkes::EventSeries s;
    s.horizon = static_cast<double>(lookback) * 1e-9;
    s.times.assign(all_events ? 8 : 6, {});
    const std::int64_t shift = as_history ? origin : origin - lookback;
    for (const auto& ev : events) {
        if (const auto d = event_dim(ev, all_events)) {
            s.times[*d].push_back(static_cast<double>(ev.base.ts_nanos - shift) * 1e-9);
        }
    }
    return s;
}

enum class FitState { Ok, Carried, Failed };

inline std::string_view to_string(FitState s) {
    switch (s) {
    case FitState::Ok: return "ok";
    case FitState::Carried: return "carried";
    case FitState::Failed: return "failed";
    }
    return "failed";
}

/// One fitted model slot: contract x (reference kernel | all-events model).
struct ModelSlot {
    std::optional<hawkes::HawkesModel> model;
    FitState state = FitState::Failed;
    std::string error;
    bool unstable = false;
};

struct RuleDecision {
    Decision chi;
    bool fallback = false;
};

struct WindowRecord {
    std::size_t index = 0;
    Window window;
    std::optional<std::size_t> oracle_window;
    Decision chi_m;

    RuleDecision hawkes;
    std::optional<double> rho_ca;
    std::optional<double> rho_nb;
    bool rho_above_one = false;
    bool sim_capped = false;

    std::array<ClfDecision, kClfDepths> clf{};
    std::int64_t realized_ca = 0;
    std::int64_t realized_nb = 0;
    std::map<std::string, std::optional<double>> loss; // per kernel
    std::map<std::string, std::string> fits;           // "c.em" -> ok | carried | failed: reason
    std::optional<Eigen::MatrixXd> norms_c;            // decision-kernel reference model
    std::optional<Eigen::MatrixXd> norms_n;
};

struct RuleAgreement {
    std::string rule;
    std::optional<Agreement> agreement; // nullopt: no overlap with the oracle
};

struct KernelSpa {
    std::string kernel;
    std::optional<SpaResult> result;
    std::string error;
};

struct RunResult {
    std::vector<WindowRecord> windows;
    std::vector<Decision> oracle; // per oracle window
    WindowGrid grid;
    WindowGrid oracle_grid;
    std::vector<RuleAgreement> agreements; // CLF1..CLF4, Hawkes
    std::vector<KernelSpa> spa;
    std::size_t loss_windows = 0;
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

inline std::int64_t count_dims(std::span<const ClassifiedEvent> events, std::int64_t begin, std::int64_t end,
                               std::span<const std::size_t> dims) {
    std::int64_t n = 0;
    for (const auto& ev : events) {
        if (ev.base.ts_nanos < begin || ev.base.ts_nanos >= end) {
            continue;
        }
        const auto d = event_dim(ev, false);
        if (d && std::find(dims.begin(), dims.end(), *d) != dims.end()) {
            ++n;
        }
    }
    return n;
}

inline std::span<const ClassifiedEvent> slice(const std::vector<ClassifiedEvent>& evs, std::int64_t begin,
                                              std::int64_t end) {
    auto lo = std::partition_point(evs.begin(), evs.end(), [&](const ClassifiedEvent& e) {
        return e.base.ts_nanos < begin;
    });
    auto hi = std::partition_point(lo, evs.end(), [&](const ClassifiedEvent& e) { return e.base.ts_nanos < end; });
    return {lo, hi};
}

/// Merged replay of both books in time order (F_c first on ties); one CLF tick
/// per event, plus the snapshots observed at each requested instant.
struct Replay {
    std::vector<ClfTick> ticks;
    std::vector<std::pair<BookSnapshot, BookSnapshot>> snapshots;
};

inline Replay replay_books(const MarketData& m, std::size_t depth, std::span<const std::int64_t> instants) {
    Replay r;
    OrderBook bc(depth);
    OrderBook bn(depth);
    const auto& ec = m.current.events;
    const auto& en = m.next.events;
    r.ticks.reserve(ec.size() + en.size());
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t s = 0;
    auto flush_snapshots = [&](std::int64_t upto) {
        while (s < instants.size() && instants[s] < upto) {
            r.snapshots.emplace_back(bc.snapshot_at(instants[s]), bn.snapshot_at(instants[s]));
            ++s;
        }
    };
    while (i < ec.size() || j < en.size()) {
        const bool take_c = j >= en.size() || (i < ec.size() && ec[i].ts_nanos <= en[j].ts_nanos);
        const auto& ev = take_c ? ec[i] : en[j];
        flush_snapshots(ev.ts_nanos); // snapshot at t holds every event with ts <= t
        if (take_c) {
            bc.apply(ev);
            ++i;
        } else {
            bn.apply(ev);
            ++j;
        }
        r.ticks.push_back(clf_tick(ev.ts_nanos, bc.snapshot_at(ev.ts_nanos), bn.snapshot_at(ev.ts_nanos)));
    }
    flush_snapshots(std::numeric_limits<std::int64_t>::max());
    return r;
}

} // namespace detail

inline std::string rule_name_clf(std::size_t depth) { return "CLF" + std::to_string(depth); }
inline std::string rule_name_hawkes(hawkes::KernelKind k) { return "Hawkes(" + std::string(to_string(k)) + ")"; }

inline WindowGrid decision_grid(const RunConfig& cfg, const MarketData& m) {
    if (m.current.events.empty() || m.next.events.empty()) {
        fail(Errc::NoEvents, "both contracts need events");
    }
    const std::int64_t first = std::max(m.current.events.front().ts_nanos, m.next.events.front().ts_nanos);
    const std::int64_t last = std::min(m.current.events.back().ts_nanos, m.next.events.back().ts_nanos);
    WindowGrid g;
    g.start_nanos = cfg.start_nanos ? *cfg.start_nanos : first + cfg.lookback_nanos;
    g.end_nanos = last + 1;
    g.step_nanos = cfg.step_nanos;
    g.width_nanos = cfg.window_nanos;
    if (g.size() == 0) {
        fail(Errc::EmptyGrid, "tick data is shorter than the fit lookback plus one window");
    }
    if (cfg.max_windows > 0 && g.size() > cfg.max_windows) {
        g.end_nanos = g.start_nanos + static_cast<std::int64_t>(cfg.max_windows - 1) * g.step_nanos + g.width_nanos;
    }
    return g;
}

/// Runs fit, forecast, decision, benchmark and SPA over every decision window.
inline RunResult run_pipeline(const RunConfig& cfg, const MarketData& market,
                              std::vector<std::pair<BookSnapshot, BookSnapshot>>* snapshots = nullptr) {
    validate(cfg);
    const auto cm = classify_market(market, cfg.book_depth);
    RunResult res;
    res.grid = decision_grid(cfg, market);
    const std::size_t n_win = res.grid.size();

    // Kernel slots: reference kernels (decision kernel included) + the all-events model.
    std::vector<hawkes::KernelKind> ref_kernels = cfg.kernels;
    if (std::find(ref_kernels.begin(), ref_kernels.end(), cfg.decision_kernel) == ref_kernels.end()) {
        ref_kernels.push_back(cfg.decision_kernel);
    }
    const std::size_t n_ref = ref_kernels.size();
    const std::size_t slots_per_contract = n_ref + 1;
    const std::size_t n_slots = 2 * slots_per_contract;
    auto slot_name = [&](std::size_t s) {
        const Leg leg = s < slots_per_contract ? Leg::Current : Leg::Next;
        const std::size_t k = s % slots_per_contract;
        const std::string kind = k < n_ref ? std::string(to_string(ref_kernels[k]))
                                           : "all-" + std::string(to_string(cfg.decision_kernel));
        return std::string(to_string(leg)) + "." + kind;
    };

    // Phase 1: independent fits.
    std::vector<ModelSlot> slots(n_win * n_slots);
    detail::parallel_for(n_win * n_slots, cfg.threads, [&](std::size_t job) {
        const std::size_t w = job / n_slots;
        const std::size_t s = job % n_slots;
        const Window win = res.grid.at(w);
        const bool is_c = s < slots_per_contract;
        const std::size_t k = s % slots_per_contract;
        const bool all = k == n_ref;
        const auto kind = all ? cfg.decision_kernel : ref_kernels[k];
        const auto hist = detail::slice(is_c ? cm.current : cm.next, win.begin - cfg.lookback_nanos + 1, win.begin);
        auto& slot = slots[job];
        try {
            const auto series = make_series(hist, win.begin, cfg.lookback_nanos, all, false);
            auto fr = hawkes::fit(kind, series, cfg.fit, all ? hawkes::all_events_index() : hawkes::reference_index());
            slot.unstable = fr.unstable;
            slot.model = std::move(fr.model);
            slot.state = FitState::Ok;
        } catch (const Error& e) {
            slot.error = e.what();
        }
    });

    // Phase 2: carry the last good model forward over failed fits.
    for (std::size_t s = 0; s < n_slots; ++s) {
        const hawkes::HawkesModel* last = nullptr;
        for (std::size_t w = 0; w < n_win; ++w) {
            auto& slot = slots[w * n_slots + s];
            if (slot.state == FitState::Ok) {
                last = &*slot.model;
            } else if (last) {
                slot.model = *last;
                slot.state = FitState::Carried;
            }
        }
    }

    // CLF ticks and snapshots from one merged replay.
    std::vector<std::int64_t> instants;
    instants.reserve(n_win);
    for (std::size_t w = 0; w < n_win; ++w) {
        instants.push_back(res.grid.at(w).begin);
    }
    auto replay = detail::replay_books(market, cfg.book_depth, snapshots ? instants : std::vector<std::int64_t>{});
    if (snapshots) {
        *snapshots = std::move(replay.snapshots);
    }
    std::array<std::vector<ClfRecord>, kClfDepths> clf_records;
    for (std::size_t d = 1; d <= kClfDepths; ++d) {
        clf_records[d - 1] = clf_stream(replay.ticks, d);
    }

    // Oracle on its own grid; decision windows map to it by containment.
    res.oracle_grid = WindowGrid{res.grid.start_nanos, res.grid.end_nanos, cfg.oracle_window_nanos,
                                 cfg.oracle_window_nanos};
    res.oracle.resize(res.oracle_grid.size());
    {
        std::vector<TickEvent> trades_c;
        std::vector<TickEvent> trades_n;
        for (const auto& ev : cm.current) {
            if (ev.base.kind == EventKind::Trade) {
                trades_c.push_back(ev.base);
            }
        }
        for (const auto& ev : cm.next) {
            if (ev.base.kind == EventKind::Trade) {
                trades_n.push_back(ev.base);
            }
        }
        for (std::size_t o = 0; o < res.oracle.size(); ++o) {
            res.oracle[o] = oracle_decision(extract_trade_pairs(trades_c, trades_n, res.oracle_grid.at(o),
                                                                cfg.pairing));
        }
    }

    // Phase 3: per-window forecasts and decisions.
    hawkes::ForecastConfig fc;
    fc.n_sims = cfg.n_sims;
    fc.horizon = static_cast<double>(cfg.horizon_nanos) * 1e-9;
    fc.ratio_of_means = cfg.ratio_of_means;
    fc.sim.max_events = cfg.max_sim_events;
    const std::size_t decision_slot = static_cast<std::size_t>(
        std::find(ref_kernels.begin(), ref_kernels.end(), cfg.decision_kernel) - ref_kernels.begin());

    res.windows.resize(n_win);
    detail::parallel_for(n_win, cfg.threads, [&](std::size_t w) {
        WindowRecord& rec = res.windows[w];
        rec.index = w;
        rec.window = res.grid.at(w);
        const std::int64_t w1 = rec.window.begin;
        rec.oracle_window = res.oracle_grid.containing(rec.window);
        if (rec.oracle_window) {
            rec.chi_m = res.oracle[*rec.oracle_window];
        }
        for (std::size_t s = 0; s < n_slots; ++s) {
            const auto& slot = slots[w * n_slots + s];
            std::string st(to_string(slot.state));
            if (slot.state == FitState::Failed && !slot.error.empty()) {
                st += ": " + slot.error;
            }
            if (slot.unstable) {
                st += " (unstable)";
            }
            rec.fits[slot_name(s)] = st;
        }

        const auto hist_c = detail::slice(cm.current, w1 - cfg.lookback_nanos + 1, w1);
        const auto hist_n = detail::slice(cm.next, w1 - cfg.lookback_nanos + 1, w1);
        const auto h_ref_c = make_series(hist_c, w1, cfg.lookback_nanos, false, true);
        const auto h_ref_n = make_series(hist_n, w1, cfg.lookback_nanos, false, true);
        const auto h_all_c = make_series(hist_c, w1, cfg.lookback_nanos, true, true);
        const auto h_all_n = make_series(hist_n, w1, cfg.lookback_nanos, true, true);
        rec.realized_ca = detail::count_dims(detail::slice(cm.current, w1, w1 + cfg.horizon_nanos), w1,
                                             w1 + cfg.horizon_nanos, kAskRefDims);
        rec.realized_nb = detail::count_dims(detail::slice(cm.next, w1, w1 + cfg.horizon_nanos), w1,
                                             w1 + cfg.horizon_nanos, kBidRefDims);

        const std::uint64_t wseed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(w)});
        std::optional<hawkes::CountSamples> ref_ca;
        std::optional<hawkes::CountSamples> ref_nb;
        for (std::size_t k = 0; k < n_ref; ++k) {
            const auto& sc = slots[w * n_slots + k];
            const auto& sn = slots[w * n_slots + slots_per_contract + k];
            const std::string kname(to_string(ref_kernels[k]));
            if (!sc.model || !sn.model) {
                rec.loss[kname] = std::nullopt;
                continue;
            }
            // Seeds are keyed by (window, contract) only, so kernels share random streams.
            auto ca = hawkes::simulate_counts(*sc.model, h_ref_c, kAskRefDims, fc, derive_seed(wseed, {0}));
            auto nb = hawkes::simulate_counts(*sn.model, h_ref_n, kBidRefDims, fc, derive_seed(wseed, {1}));
            rec.sim_capped = rec.sim_capped || ca.capped || nb.capped;
            rec.loss[kname] = loglik_loss(rec.realized_ca, ca.counts, cfg.loss_eps) +
                              loglik_loss(rec.realized_nb, nb.counts, cfg.loss_eps);
            if (k == decision_slot) {
                ref_ca = std::move(ca);
                ref_nb = std::move(nb);
                rec.norms_c = hawkes::kernel_norms(*sc.model);
                rec.norms_n = hawkes::kernel_norms(*sn.model);
            }
        }
        if (std::find(cfg.kernels.begin(), cfg.kernels.end(), cfg.decision_kernel) == cfg.kernels.end()) {
            rec.loss.erase(std::string(to_string(cfg.decision_kernel)));
        }

        const auto& all_c = slots[w * n_slots + n_ref];
        const auto& all_n = slots[w * n_slots + slots_per_contract + n_ref];
        if (ref_ca && ref_nb && all_c.model && all_n.model) {
            const auto a_ca = hawkes::simulate_counts(*all_c.model, h_all_c, kAskAllDims, fc, derive_seed(wseed, {2}));
            const auto a_nb = hawkes::simulate_counts(*all_n.model, h_all_n, kBidAllDims, fc, derive_seed(wseed, {3}));
            const auto f_ca = hawkes::arrival_ratio_from_samples(*ref_ca, a_ca, cfg.ratio_of_means);
            const auto f_nb = hawkes::arrival_ratio_from_samples(*ref_nb, a_nb, cfg.ratio_of_means);
            rec.rho_ca = f_ca.rho;
            rec.rho_nb = f_nb.rho;
            rec.rho_above_one = f_ca.above_one || f_nb.above_one;
            rec.sim_capped = rec.sim_capped || f_ca.capped || f_nb.capped;
        }
        const auto hd = hawkes::hawkes_decision(rec.rho_ca, rec.rho_nb);
        rec.hawkes = {to_chi(hd.reference), hd.fallback};

        for (std::size_t d = 0; d < kClfDepths; ++d) {
            const auto& recs = clf_records[d];
            const std::int64_t lo = w1 - cfg.clf.vote_window_nanos;
            auto b = std::partition_point(recs.begin(), recs.end(), [&](const ClfRecord& r) { return r.ts_nanos <= lo; });
            auto e = std::partition_point(b, recs.end(), [&](const ClfRecord& r) { return r.ts_nanos <= w1; });
            ClfVoteConfig vc = cfg.clf;
            vc.depth = d + 1;
            rec.clf[d] = clf_decision(std::span<const ClfRecord>(recs).subspan(static_cast<std::size_t>(b - recs.begin()),
                                                                                 static_cast<std::size_t>(e - b)),
                                      vc);
        }
    });

    // Agreement: CLF1..4 then Hawkes.
    auto oracle_series = [&] {
        std::vector<Decision> v;
        for (const auto& r : res.windows) {
            v.push_back(r.chi_m);
        }
        return v;
    }();
    auto score = [&](const std::string& name, const std::vector<Decision>& chi) {
        RuleAgreement ra{name, std::nullopt};
        try {
            ra.agreement = agreement_score(chi, oracle_series);
        } catch (const Error& e) {
            if (e.code() != Errc::NoOverlap) {
                throw;
            }
        }
        res.agreements.push_back(ra);
    };
    for (std::size_t d = 0; d < kClfDepths; ++d) {
        std::vector<Decision> chi;
        for (const auto& r : res.windows) {
            chi.push_back(to_chi(r.clf[d].reference));
        }
        score(rule_name_clf(d + 1), chi);
    }
    {
        std::vector<Decision> chi;
        for (const auto& r : res.windows) {
            chi.push_back(r.hawkes.chi);
        }
        score(rule_name_hawkes(cfg.decision_kernel), chi);
    }

    // SPA over windows where every kernel has a loss.
    std::map<std::string, std::vector<double>> losses;
    for (const auto& r : res.windows) {
        const bool complete = std::all_of(r.loss.begin(), r.loss.end(), [](const auto& kv) { return kv.second; });
        if (!complete || r.loss.empty()) {
            continue;
        }
        for (const auto& [k, v] : r.loss) {
            losses[k].push_back(*v);
        }
        ++res.loss_windows;
    }
    if (cfg.kernels.size() >= 2) {
        for (auto kind : cfg.kernels) {
            KernelSpa ks{std::string(to_string(kind)), std::nullopt, {}};
            try {
                if (res.loss_windows < 2) {
                    fail(Errc::InvalidArgument, "fewer than two windows with complete losses");
                }
                SpaConfig sc = cfg.spa;
                sc.seed = derive_seed(cfg.seed, {0x5A, static_cast<std::uint64_t>(kind)});
                if (cfg.spa.seed != 0) {
                    sc.seed = derive_seed(cfg.spa.seed, {static_cast<std::uint64_t>(kind)});
                }
                ks.result = spa_test(losses, ks.kernel, sc);
            } catch (const Error& e) {
                ks.error = e.what();
            }
            res.spa.push_back(std::move(ks));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json decision_json(const Decision& d) {
    return d ? nlohmann::ordered_json(static_cast<int>(*d)) : nlohmann::ordered_json(nullptr);
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace detail

inline nlohmann::ordered_json window_json(const WindowRecord& r, std::size_t clf_depth) {
    using detail::decision_json;
    using detail::optional_json;
    nlohmann::ordered_json j;
    j["type"] = "window";
    j["window"] = r.index;
    j["w1"] = r.window.begin;
    j["w2"] = r.window.end;
    j["oracle_window"] = optional_json(r.oracle_window);
    j["chi_m"] = decision_json(r.chi_m);
    j["chi_h"] = decision_json(r.hawkes.chi);
    j["chi_h_fallback"] = r.hawkes.fallback;
    j["rho_ca"] = optional_json(r.rho_ca);
    j["rho_nb"] = optional_json(r.rho_nb);
    j["rho_above_one"] = r.rho_above_one;
    j["sim_capped"] = r.sim_capped;
    j["chi_b"] = to_chi(r.clf.at(clf_depth - 1).reference);
    auto clf = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < kClfDepths; ++d) {
        const auto& c = r.clf[d];
        nlohmann::ordered_json cj;
        cj["depth"] = d + 1;
        cj["chi_b"] = to_chi(c.reference);
        cj["fallback"] = c.fallback;
        cj["clf_c"] = c.smoothed_c;
        cj["clf_n"] = c.smoothed_n;
        cj["ticks"] = c.used;
        cj["skipped"] = c.skipped;
        cj["votes_c"] = c.votes_c;
        cj["votes_n"] = c.votes_n;
        clf.push_back(cj);
    }
    j["clf"] = clf;
    j["realized_ca"] = r.realized_ca;
    j["realized_nb"] = r.realized_nb;
    nlohmann::ordered_json loss = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.loss) {
        loss[k] = optional_json(v);
    }
    j["loss"] = loss;
    nlohmann::ordered_json fits = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.fits) {
        fits[k] = v;
    }
    j["fits"] = fits;
    return j;
}

inline nlohmann::ordered_json summary_json(const RunResult& res, const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["type"] = "summary";
    j["seed"] = cfg.seed;
    j["windows"] = res.windows.size();
    j["oracle_windows"] = res.oracle.size();
    j["oracle_defined"] = std::count_if(res.oracle.begin(), res.oracle.end(), [](const Decision& d) { return d; });
    j["decision_kernel"] = std::string(to_string(cfg.decision_kernel));
    j["clf_depth"] = cfg.clf.depth;
    j["clf_vote"] = cfg.clf.mode == VoteMode::Ema ? "ema" : "majority";
    auto agreements = nlohmann::ordered_json::array();
    for (const auto& a : res.agreements) {
        nlohmann::ordered_json aj;
        aj["rule"] = a.rule;
        aj["agreement"] = a.agreement ? nlohmann::ordered_json(a.agreement->score) : nlohmann::ordered_json(nullptr);
        aj["scored"] = a.agreement ? a.agreement->scored : 0;
        agreements.push_back(aj);
    }
    j["agreement"] = agreements;
    j["loss_windows"] = res.loss_windows;
    auto spa = nlohmann::ordered_json::array();
    for (const auto& s : res.spa) {
        nlohmann::ordered_json sj;
        sj["benchmark"] = s.kernel;
        if (s.result) {
            sj["spa"] = s.result->p_consistent;
            sj["p_lower"] = s.result->p_lower;
            sj["p_upper"] = s.result->p_upper;
            sj["statistic"] = s.result->statistic;
            nlohmann::ordered_json models = nlohmann::ordered_json::object();
            for (const auto& [name, m] : s.result->models) {
                models[name] = {{"mean_diff", m.mean_diff}, {"t_stat", m.t_stat}, {"p_value", m.p_value},
                                {"degenerate", m.degenerate}};
            }
            sj["rivals"] = models;
        } else {
            sj["spa"] = nullptr;
            sj["error"] = s.error;
        }
        spa.push_back(sj);
    }
    j["spa"] = spa;
    std::size_t h_fallback = 0;
    std::size_t above_one = 0;
    std::size_t capped = 0;
    for (const auto& r : res.windows) {
        h_fallback += r.hawkes.fallback ? 1 : 0;
        above_one += r.rho_above_one ? 1 : 0;
        capped += r.sim_capped ? 1 : 0;
    }
    j["chi_h_fallback_windows"] = h_fallback;
    j["rho_above_one_windows"] = above_one;
    j["sim_capped_windows"] = capped;
    return j;
}

inline std::string format_fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

/// Human-readable tables rebuilt from the summary record.
inline std::string report_text(const nlohmann::ordered_json& summary) {
    std::ostringstream os;
    os << "windows " << summary.at("windows").get<std::size_t>() << ", oracle windows "
       << summary.at("oracle_windows").get<std::size_t>() << " (" << summary.at("oracle_defined").get<std::size_t>()
       << " with trade pairs), decision kernel " << summary.at("decision_kernel").get<std::string>()
       << ", CLF vote " << summary.at("clf_vote").get<std::string>() << " (selected depth "
       << summary.at("clf_depth").get<std::size_t>() << ")\n\n";
    os << "Agreement with the market-optimal decision\n";
    os << std::left << std::setw(16) << "rule" << std::setw(12) << "agreement" << "scored\n";
    for (const auto& a : summary.at("agreement")) {
        const auto& v = a.at("agreement");
        os << std::left << std::setw(16) << a.at("rule").get<std::string>() << std::setw(12)
           << (v.is_null() ? std::string("-") : format_fixed(v.get<double>())) << a.at("scored").get<std::size_t>()
           << "\n";
    }
    os << "\nSPA test (consistent p-value with each kernel as benchmark), " << summary.at("loss_windows").get<std::size_t>()
       << " windows\n";
    os << std::left << std::setw(10) << "kernel" << std::setw(10) << "spa" << std::setw(10) << "lower" << "upper\n";
    for (const auto& s : summary.at("spa")) {
        os << std::left << std::setw(10) << s.at("benchmark").get<std::string>();
        if (s.at("spa").is_null()) {
            os << "- (" << s.at("error").get<std::string>() << ")\n";
        } else {
            os << std::setw(10) << format_fixed(s.at("spa").get<double>(), 3) << std::setw(10)
               << format_fixed(s.at("p_lower").get<double>(), 3) << format_fixed(s.at("p_upper").get<double>(), 3)
               << "\n";
        }
    }
    os << "\nHawkes fallback windows " << summary.at("chi_h_fallback_windows").get<std::size_t>()
       << ", rho > 1 windows " << summary.at("rho_above_one_windows").get<std::size_t>() << ", capped simulations "
       << summary.at("sim_capped_windows").get<std::size_t>() << "\n";
    return os.str();
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) {
        fail(Errc::Io, "cannot write '" + p.string() + "'");
    }
    return f;
}

/// records.jsonl (per-window records then the summary), norms.jsonl,
/// report.txt and, optionally, snapshots.tsv.
inline void write_run(const RunResult& res, const RunConfig& cfg,
                      const std::vector<std::pair<BookSnapshot, BookSnapshot>>* snapshots = nullptr) {
    const std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        fail(Errc::Io, "cannot create '" + dir.string() + "': " + ec.message());
    }
    const auto summary = summary_json(res, cfg);
    {
        auto f = open_out(dir / "records.jsonl");
        for (const auto& r : res.windows) {
            f << window_json(r, cfg.clf.depth).dump() << "\n";
        }
        f << summary.dump() << "\n";
    }
    {
        auto f = open_out(dir / "norms.jsonl");
        const auto labels = hawkes::reference_index().labels;
        for (const auto& r : res.windows) {
            for (const auto& [leg, m] : {std::pair{"c", &r.norms_c}, std::pair{"n", &r.norms_n}}) {
                if (!*m) {
                    continue;
                }
                nlohmann::ordered_json j;
                j["window"] = r.index;
                j["w1"] = r.window.begin;
                j["contract"] = leg;
                j["kernel"] = std::string(to_string(cfg.decision_kernel));
                j["labels"] = labels;
                j["norms"] = detail::matrix_json(**m);
                f << j.dump() << "\n";
            }
        }
    }
    {
        auto f = open_out(dir / "report.txt");
        f << report_text(summary);
    }
    if (snapshots) {
        auto f = open_out(dir / "snapshots.tsv");
        for (std::size_t w = 0; w < snapshots->size(); ++w) {
            write_snapshot_row(f, w, "c", (*snapshots)[w].first, cfg.book_depth);
            write_snapshot_row(f, w, "n", (*snapshots)[w].second, cfg.book_depth);
        }
    }
}

/// Reads a run directory back: summary text, plus plot-ready series.tsv and norms.tsv.
inline std::string report_run(const std::filesystem::path& dir) {
    const auto records = dir / "records.jsonl";
    std::ifstream in(records);
    if (!in) {
        fail(Errc::Io, "no run artifacts in '" + dir.string() + "' (records.jsonl missing)");
    }
    std::optional<nlohmann::ordered_json> summary;
    auto series = open_out(dir / "series.tsv");
    series << "window\tw1\tchi_m\tchi_h";
    for (std::size_t d = 1; d <= kClfDepths; ++d) {
        series << "\tchi_b" << d;
    }
    series << "\trho_ca\trho_nb\n";
    auto cell = [](const nlohmann::ordered_json& v) {
        return v.is_null() ? std::string("NA") : v.dump();
    };
    std::string line;
    std::size_t row = 0;
    try {
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) {
                continue;
            }
            auto j = nlohmann::ordered_json::parse(line);
            if (j.at("type") == "summary") {
                summary = std::move(j);
                continue;
            }
            series << j.at("window").get<std::size_t>() << "\t" << j.at("w1").get<std::int64_t>() << "\t"
                   << cell(j.at("chi_m")) << "\t" << cell(j.at("chi_h"));
            for (const auto& c : j.at("clf")) {
                series << "\t" << c.at("chi_b").get<int>();
            }
            series << "\t" << cell(j.at("rho_ca")) << "\t" << cell(j.at("rho_nb")) << "\n";
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::Io, records.string() + ":" + std::to_string(row) + ": " + e.what());
    }
    if (!summary) {
        fail(Errc::Io, "'" + records.string() + "' has no summary record");
    }
    std::ifstream nin(dir / "norms.jsonl");
    if (nin) {
        auto norms = open_out(dir / "norms.tsv");
        norms << "window\tcontract\tsource\ttarget\tnorm\n";
        while (std::getline(nin, line)) {
            if (line.empty()) {
                continue;
            }
            const auto j = nlohmann::ordered_json::parse(line);
            const auto labels = j.at("labels").get<std::vector<std::string>>();
            const auto& m = j.at("norms");
            for (std::size_t i = 0; i < m.size(); ++i) {
                for (std::size_t k = 0; k < m[i].size(); ++k) {
                    // row i is the excited type, column k the exciting type
                    norms << j.at("window").get<std::size_t>() << "\t" << j.at("contract").get<std::string>() << "\t"
                          << labels.at(k) << "\t" << labels.at(i) << "\t" << m[i][k].dump() << "\n";
                }
            }
        }
    }
    return report_text(*summary);
}

} // namespace calspread
