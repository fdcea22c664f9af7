#pragma once

#include "calspread/rng.hpp"
#include "calspread/spa.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace testsupport {

struct SpaCalibration {
    std::size_t runs = 0;
    std::size_t rejections = 0;
    [[nodiscard]] double rate() const { return static_cast<double>(rejections) / static_cast<double>(runs); }
};

/// Benchmark plus two rivals with i.i.d. N(0, 1) losses over `n` windows.
/// `edge_se` shifts rival "a" down by that many standard errors of its loss
/// differential (sd sqrt(2)), so 0 is the null and 3 the planted superior model.
inline SpaCalibration spa_calibration(double edge_se, std::size_t runs, std::uint64_t seed, std::size_t n = 500,
                                      double level = 0.05) {
    using namespace calspread;
    SpaCalibration out;
    const double shift = edge_se * std::sqrt(2.0) / std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < runs; ++r) {
        Rng rng(derive_seed(seed, {r}));
        std::map<std::string, std::vector<double>> losses;
        for (const char* name : {"bench", "a", "b"}) {
            auto& v = losses[name];
            v.resize(n);
            for (auto& x : v) {
                x = rng.normal();
            }
        }
        for (auto& x : losses["a"]) {
            x -= shift;
        }
        SpaConfig cfg;
        cfg.resamples = 500;
        cfg.mean_block = 10.0;
        cfg.seed = derive_seed(seed, {r, 1});
        const auto res = spa_test(losses, "bench", cfg);
        ++out.runs;
        out.rejections += res.p_consistent < level ? 1 : 0;
    }
    return out;
}

} // namespace testsupport
