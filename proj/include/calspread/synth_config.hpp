#pragma once

#include "calspread/pipeline.hpp"
#include "calspread/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace calspread::synth {

enum class PlanMode { None, Slippage, Alternating, Random, AllOne };

inline PlanMode plan_mode_from_string(const std::string& s) {
    if (s == "none") return PlanMode::None;
    if (s == "slippage") return PlanMode::Slippage;
    if (s == "alternating") return PlanMode::Alternating;
    if (s == "random") return PlanMode::Random;
    if (s == "all_one") return PlanMode::AllOne;
    fail(Errc::Config, "plan.mode must be none, slippage, alternating, random or all_one (got '" + s + "')");
}

/// Everything the synth command needs: the market, the planting scheme and
/// the run config to emit next to the generated files.
struct SynthJob {
    SynthConfig market;
    PlanMode mode = PlanMode::None;
    std::int64_t oracle_window_nanos = 100'000'000;
    double empty_fraction = 0.0; // random mode: share of windows left without pairs
    PlantOptions plant;
    nlohmann::json run = nlohmann::json::object();
};

inline ContractSpec contract_from_json(const nlohmann::json& j, ContractSpec c) {
    calspread::detail::check_keys(j,
                       {"symbol", "start_bid", "rates", "self_branching", "beta", "levels", "max_levels", "lot_size",
                        "min_lots", "max_lots", "max_gap_ticks"},
                       "contract");
    c.symbol = j.value("symbol", c.symbol);
    if (j.contains("start_bid")) {
        c.start_bid = Price::parse_or_throw(j.at("start_bid").get<std::string>());
    }
    if (j.contains("rates")) {
        const auto v = j.at("rates").get<std::vector<double>>();
        if (v.size() != kDims) {
            fail(Errc::Config, "rates needs 8 values: T_A T_B C_A C_B PDM_A PDM_B O_A O_B");
        }
        std::array<double, kDims> r{};
        std::copy(v.begin(), v.end(), r.begin());
        c.generator = self_exciting_generator(r, j.value("self_branching", 0.0), j.value("beta", 100.0));
    }
    c.levels = j.value("levels", c.levels);
    c.max_levels = j.value("max_levels", c.max_levels);
    c.lot_size = j.value("lot_size", c.lot_size);
    c.min_lots = j.value("min_lots", c.min_lots);
    c.max_lots = j.value("max_lots", c.max_lots);
    c.max_gap_ticks = j.value("max_gap_ticks", c.max_gap_ticks);
    if (c.min_lots < 1 || c.max_lots < c.min_lots || c.max_gap_ticks < 1 || c.levels < 1 ||
        c.max_levels < c.levels + 2) {
        fail(Errc::Config, "contract '" + c.symbol + "': bad ladder settings");
    }
    return c;
}

inline SynthJob synth_job_from_json(const nlohmann::json& j) {
    calspread::detail::check_keys(j, {"duration_s", "seed", "start_ns", "tick_size", "current", "next", "plan", "run"}, "synth config");
    SynthJob job;
    try {
        auto& m = job.market;
        m.duration_s = j.value("duration_s", m.duration_s);
        m.seed = j.value("seed", m.seed);
        m.start_nanos = j.value("start_ns", m.start_nanos);
        if (j.contains("tick_size")) {
            m.tick = Price::parse_or_throw(j.at("tick_size").get<std::string>());
        }
        if (j.contains("current")) {
            m.current = contract_from_json(j.at("current"), m.current);
        }
        if (j.contains("next")) {
            m.next = contract_from_json(j.at("next"), m.next);
        }
        if (j.contains("plan")) {
            const auto& p = j.at("plan");
            calspread::detail::check_keys(p, {"mode", "oracle_window_ms", "leg_gap_ms", "pair_spacing_ms", "decoys",
                                   "empty_fraction"},
                               "plan");
            job.mode = plan_mode_from_string(p.value("mode", std::string("none")));
            job.oracle_window_nanos = calspread::detail::ms_to_nanos(p.value("oracle_window_ms", 100.0));
            job.plant.leg_gap_nanos = calspread::detail::ms_to_nanos(p.value("leg_gap_ms", 1.0));
            job.plant.pair_spacing_nanos = calspread::detail::ms_to_nanos(p.value("pair_spacing_ms", 3.0));
            job.plant.decoys = p.value("decoys", true);
            job.empty_fraction = p.value("empty_fraction", 0.0);
        }
        if (j.contains("run")) {
            job.run = j.at("run");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::Config, std::string("bad synth config value: ") + e.what());
    }
    if (job.oracle_window_nanos <= 0) {
        fail(Errc::Config, "plan.oracle_window_ms must be positive");
    }
    job.plant.grid = WindowGrid{job.market.start_nanos,
                                job.market.start_nanos + std::llround(job.market.duration_s * 1e9),
                                job.oracle_window_nanos, job.oracle_window_nanos};
    if (j.contains("run") && job.run.contains("max_critical_interval_ms")) {
        job.plant.pairing.max_critical_interval_nanos =
            calspread::detail::ms_to_nanos(job.run.at("max_critical_interval_ms").get<double>());
    }
    return job;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(Errc::Config, "cannot open config '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::Config, "'" + path + "': " + e.what());
    }
}

/// Planted series for the fixed-pattern modes.
inline std::vector<Decision> fixed_plan(PlanMode mode, std::size_t n, double empty_fraction, std::uint64_t seed) {
    std::vector<Decision> plan(n);
    Rng rng(derive_seed(seed, {4}));
    for (std::size_t k = 0; k < n; ++k) {
        switch (mode) {
        case PlanMode::Alternating: plan[k] = static_cast<std::uint8_t>(k % 2); break;
        case PlanMode::AllOne: plan[k] = 1; break;
        case PlanMode::Random:
            if (!rng.bernoulli(empty_fraction)) {
                plan[k] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
            }
            break;
        default: break;
        }
    }
    return plan;
}

inline SynthMarket generate(const SynthJob& job) {
    switch (job.mode) {
    case PlanMode::None: return generate_market(job.market);
    case PlanMode::Slippage: return generate_slippage_market(job.market, job.plant);
    default: {
        const auto plan = fixed_plan(job.mode, job.plant.grid.size(), job.empty_fraction, job.market.seed);
        return generate_labeled_pairs(job.market, plan, job.plant);
    }
    }
}

/// current.csv, next.csv, oracle.tsv (planted modes) and run.json wired to them.
inline void write_job_outputs(const std::filesystem::path& dir, const SynthJob& job, const SynthMarket& m) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        fail(Errc::Io, "cannot create '" + dir.string() + "': " + ec.message());
    }
    write_market((dir / "current.csv").string(), (dir / "next.csv").string(), m);
    if (!m.expected_oracle.empty()) {
        auto f = open_out(dir / "oracle.tsv");
        f << "window\tw1\tchi_m\n";
        for (std::size_t k = 0; k < m.expected_oracle.size(); ++k) {
            f << k << "\t" << job.plant.grid.at(k).begin << "\t";
            if (m.expected_oracle[k]) {
                f << static_cast<int>(*m.expected_oracle[k]);
            } else {
                f << "NA";
            }
            f << "\n";
        }
    }
    nlohmann::json run = job.run;
    run["current_path"] = "current.csv";
    run["next_path"] = "next.csv";
    if (!run.contains("oracle_window_ms")) {
        run["oracle_window_ms"] = static_cast<double>(job.oracle_window_nanos) / 1e6;
    }
    if (!run.contains("out_dir")) {
        run["out_dir"] = "run";
    }
    auto f = open_out(dir / "run.json");
    f << run.dump(2) << "\n";
}

} // namespace calspread::synth
