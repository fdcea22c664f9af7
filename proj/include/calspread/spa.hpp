#pragma once

#include "calspread/error.hpp"
#include "calspread/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace calspread {

struct SpaConfig {
    std::size_t resamples = 1000;
    double mean_block = 10.0;
    std::uint64_t seed = 0;
};

struct SpaModelResult {
    double mean_diff = 0.0;   // mean of L_bench - L_model; positive = model beats benchmark
    double t_stat = 0.0;      // sqrt(n) mean / omega
    double p_value = 1.0;     // single-rival consistent p-value
    bool degenerate = false;  // zero bootstrap variance, excluded
};

/// Hansen's test for superior predictive ability of the rivals over `benchmark`.
struct SpaResult {
    std::string benchmark;
    double statistic = 0.0;
    double p_consistent = 1.0;
    double p_lower = 1.0;
    double p_upper = 1.0;
    std::size_t windows = 0;
    std::map<std::string, SpaModelResult> models;
};

/// Stationary bootstrap index path of length n with geometric blocks.
inline void stationary_indices(Rng& rng, std::size_t n, double mean_block, std::vector<std::size_t>& out) {
    out.resize(n);
    const double p = 1.0 / mean_block;
    std::size_t idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) {
            if (rng.uniform() < p) {
                idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
            } else {
                idx = (idx + 1) % n;
            }
        }
        out[t] = idx;
    }
}

/// Losses keyed by model name; all series aligned and of equal length. The
/// bootstrap draws one index path per resample, shared by every rival.
inline SpaResult spa_test(const std::map<std::string, std::vector<double>>& losses, const std::string& benchmark,
                          const SpaConfig& cfg = {}) {
    const auto bench_it = losses.find(benchmark);
    if (bench_it == losses.end()) {
        fail(Errc::InvalidArgument, "benchmark model '" + benchmark + "' has no losses");
    }
    if (losses.size() < 2) {
        fail(Errc::InvalidArgument, "SPA needs at least two models");
    }
    const auto& bench = bench_it->second;
    const std::size_t n = bench.size();
    if (n < 2) {
        fail(Errc::InvalidArgument, "SPA needs at least two windows");
    }
    if (cfg.resamples == 0 || !(cfg.mean_block >= 1.0)) {
        fail(Errc::InvalidArgument, "SPA needs resamples > 0 and mean block >= 1");
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> diffs;
    for (const auto& [name, series] : losses) {
        if (name == benchmark) {
            continue;
        }
        if (series.size() != n) {
            fail(Errc::InvalidArgument, "loss series for '" + name + "' is not aligned with the benchmark");
        }
        std::vector<double> d(n);
        for (std::size_t t = 0; t < n; ++t) {
            d[t] = bench[t] - series[t];
        }
        names.push_back(name);
        diffs.push_back(std::move(d));
    }
    const std::size_t m = names.size();
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    std::vector<double> mean(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        for (double v : diffs[k]) {
            mean[k] += v;
        }
        mean[k] /= static_cast<double>(n);
    }

    // Bootstrap means, one row per resample.
    Rng rng(cfg.seed);
    std::vector<std::size_t> idx;
    std::vector<double> boot(cfg.resamples * m);
    for (std::size_t b = 0; b < cfg.resamples; ++b) {
        stationary_indices(rng, n, cfg.mean_block, idx);
        for (std::size_t k = 0; k < m; ++k) {
            double s = 0.0;
            for (std::size_t t : idx) {
                s += diffs[k][t];
            }
            boot[b * m + k] = s / static_cast<double>(n);
        }
    }
    std::vector<double> omega(m, 0.0);
    std::vector<bool> active(m, false);
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t b = 0; b < cfg.resamples; ++b) {
            const double z = sqrt_n * (boot[b * m + k] - mean[k]);
            s += z;
            s2 += z * z;
        }
        const double r = static_cast<double>(cfg.resamples);
        const double var = std::max(0.0, s2 / r - (s / r) * (s / r));
        omega[k] = std::sqrt(var);
        active[k] = omega[k] > 1e-12 * (1.0 + std::abs(mean[k]) * sqrt_n);
    }
    SpaResult res;
    res.benchmark = benchmark;
    res.windows = n;
    if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) {
        fail(Errc::DegenerateVariance, "every loss differential against '" + benchmark + "' has zero variance");
    }

    const double threshold = std::sqrt(2.0 * std::log(std::log(static_cast<double>(n))));
    std::vector<double> t_stat(m, 0.0);
    double stat = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (active[k]) {
            t_stat[k] = sqrt_n * mean[k] / omega[k];
            stat = std::max(stat, t_stat[k]);
        }
    }
    res.statistic = stat;

    // Recentering: lower (max(0, d)), consistent (d unless clearly negative), upper (d).
    std::vector<double> g_l(m);
    std::vector<double> g_c(m);
    for (std::size_t k = 0; k < m; ++k) {
        g_l[k] = std::max(0.0, mean[k]);
        g_c[k] = active[k] && t_stat[k] >= -threshold ? mean[k] : 0.0;
    }
    std::size_t hit_l = 0;
    std::size_t hit_c = 0;
    std::size_t hit_u = 0;
    std::vector<std::size_t> hit_k(m, 0);
    for (std::size_t b = 0; b < cfg.resamples; ++b) {
        double tl = 0.0;
        double tc = 0.0;
        double tu = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (!active[k]) {
                continue;
            }
            const double z = boot[b * m + k];
            const double zl = sqrt_n * (z - g_l[k]) / omega[k];
            const double zc = sqrt_n * (z - g_c[k]) / omega[k];
            const double zu = sqrt_n * (z - mean[k]) / omega[k];
            tl = std::max(tl, zl);
            tc = std::max(tc, zc);
            tu = std::max(tu, zu);
            if (std::max(0.0, zc) >= std::max(0.0, t_stat[k])) {
                ++hit_k[k];
            }
        }
        hit_l += tl >= stat ? 1 : 0;
        hit_c += tc >= stat ? 1 : 0;
        hit_u += tu >= stat ? 1 : 0;
    }
    const double r = static_cast<double>(cfg.resamples);
    res.p_lower = static_cast<double>(hit_l) / r;
    res.p_consistent = static_cast<double>(hit_c) / r;
    res.p_upper = static_cast<double>(hit_u) / r;
    for (std::size_t k = 0; k < m; ++k) {
        SpaModelResult mr;
        mr.mean_diff = mean[k];
        mr.degenerate = !active[k];
        if (active[k]) {
            mr.t_stat = t_stat[k];
            mr.p_value = static_cast<double>(hit_k[k]) / r;
        }
        res.models[names[k]] = mr;
    }
    return res;
}

} // namespace calspread
