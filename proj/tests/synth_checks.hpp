#pragma once

#include "calspread/benchmark.hpp"
#include "calspread/synth.hpp"

#include <vector>

namespace testsupport {

/// Oracle series recomputed from the generated tick streams alone.
inline std::vector<calspread::Decision> observed_oracle(const calspread::synth::SynthMarket& m,
                                                        const calspread::WindowGrid& grid,
                                                        const calspread::PairingConfig& pairing = {}) {
    std::vector<calspread::Decision> out;
    out.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto pairs = calspread::extract_trade_pairs(m.current.events, m.next.events, grid.at(k), pairing);
        out.push_back(calspread::oracle_decision(pairs));
    }
    return out;
}

struct OracleTally {
    std::size_t windows = 0;
    std::size_t planted = 0;  // windows with a planted decision
    std::size_t mismatches = 0;
};

inline OracleTally compare_oracle(const std::vector<calspread::Decision>& expected,
                                  const std::vector<calspread::Decision>& observed) {
    OracleTally t;
    t.windows = expected.size();
    if (observed.size() != expected.size()) {
        t.mismatches = expected.size();
        return t;
    }
    for (std::size_t k = 0; k < expected.size(); ++k) {
        t.planted += expected[k] ? 1 : 0;
        t.mismatches += expected[k] != observed[k] ? 1 : 0;
    }
    return t;
}

} // namespace testsupport

#include "calspread/pipeline.hpp"
#include "calspread/synth_config.hpp"

namespace testsupport {

struct SynthRun {
    calspread::synth::SynthJob job;
    calspread::synth::SynthMarket market;
    calspread::RunConfig config;
    calspread::MarketData data;
};

/// Generates the market of a synth config and the run config it embeds,
/// without touching the filesystem.
inline SynthRun synth_run(const std::string& path) {
    SynthRun r;
    r.job = calspread::synth::synth_job_from_json(calspread::synth::read_json_file(path));
    r.market = calspread::synth::generate(r.job);
    nlohmann::json run = r.job.run;
    if (!run.contains("oracle_window_ms")) {
        run["oracle_window_ms"] = static_cast<double>(r.job.oracle_window_nanos) / 1e6;
    }
    r.config = calspread::run_config_from_json(run);
    r.data.current = r.market.current;
    r.data.next = r.market.next;
    return r;
}

inline const calspread::RuleAgreement* find_rule(const calspread::RunResult& res, const std::string& rule) {
    for (const auto& a : res.agreements) {
        if (a.rule == rule) {
            return &a;
        }
    }
    return nullptr;
}

} // namespace testsupport
