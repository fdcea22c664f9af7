#pragma once

#include "calspread/hawkes/simulate.hpp"
#include "calspread/leg.hpp"
#include "calspread/rng.hpp"

#include <optional>
#include <span>
#include <vector>

namespace calspread::hawkes {

struct ForecastConfig {
    std::size_t n_sims = 200;
    double horizon = 0.010; // seconds
    bool ratio_of_means = true;
    SimulationOptions sim;
};

/// Per-path totals over a set of dimensions.
struct CountSamples {
    std::vector<std::int64_t> counts;
    bool capped = false;

    [[nodiscard]] double mean() const {
        if (counts.empty()) {
            return 0.0;
        }
        double s = 0.0;
        for (auto c : counts) {
            s += static_cast<double>(c);
        }
        return s / static_cast<double>(counts.size());
    }
};

/// K conditional paths; path k uses seed derive_seed(seed, {k}), so two models
/// driven with the same seed share their random schedule.
inline CountSamples simulate_counts(const HawkesModel& model, const EventSeries& history,
                                    std::span<const std::size_t> dims, const ForecastConfig& cfg, std::uint64_t seed) {
    const Simulator sim(model, history, cfg.sim);
    CountSamples out;
    out.counts.reserve(cfg.n_sims);
    for (std::size_t k = 0; k < cfg.n_sims; ++k) {
        const auto path = sim.run(cfg.horizon, derive_seed(seed, {k}));
        std::int64_t n = 0;
        for (auto d : dims) {
            n += static_cast<std::int64_t>(path.times.at(d).size());
        }
        out.counts.push_back(n);
        out.capped = out.capped || path.capped;
    }
    return out;
}

struct ArrivalForecast {
    double n_ref = 0.0;
    double n_all = 0.0;
    std::optional<double> rho; // nullopt: no simulated events at all
    bool above_one = false;    // reported, never clamped
    bool capped = false;
};

inline ArrivalForecast arrival_ratio_from_samples(const CountSamples& ref, const CountSamples& all,
                                                  bool ratio_of_means = true) {
    ArrivalForecast f;
    f.n_ref = ref.mean();
    f.n_all = all.mean();
    f.capped = ref.capped || all.capped;
    if (ratio_of_means) {
        if (f.n_all > 0.0) {
            f.rho = f.n_ref / f.n_all;
        }
    } else {
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t k = 0; k < std::min(ref.counts.size(), all.counts.size()); ++k) {
            if (all.counts[k] > 0) {
                sum += static_cast<double>(ref.counts[k]) / static_cast<double>(all.counts[k]);
                ++used;
            }
        }
        if (used > 0) {
            f.rho = sum / static_cast<double>(used);
        }
    }
    f.above_one = f.rho && *f.rho > 1.0;
    return f;
}

/// rho = simulated reference-impacting count / simulated total count on one
/// (contract, side); `ref_dims` index model_ref, `all_dims` index model_all.
inline ArrivalForecast arrival_ratio(const HawkesModel& model_ref, const HawkesModel& model_all,
                                     const EventSeries& history_ref, const EventSeries& history_all,
                                     std::span<const std::size_t> ref_dims, std::span<const std::size_t> all_dims,
                                     const ForecastConfig& cfg, std::uint64_t seed) {
    const auto ref = simulate_counts(model_ref, history_ref, ref_dims, cfg, seed);
    const auto all = simulate_counts(model_all, history_all, all_dims, cfg, seed);
    return arrival_ratio_from_samples(ref, all, cfg.ratio_of_means);
}

struct HawkesDecision {
    Leg reference = Leg::Next;
    bool fallback = false; // a ratio was undefined
};

/// Reference = F_n iff rho(c, ask) >= rho(n, bid).
inline HawkesDecision hawkes_decision(std::optional<double> rho_ca, std::optional<double> rho_nb,
                                      Leg fallback = Leg::Next) {
    if (!rho_ca || !rho_nb) {
        return {fallback, true};
    }
    return {*rho_ca >= *rho_nb ? Leg::Next : Leg::Current, false};
}

} // namespace calspread::hawkes
