// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "calspread/clf.hpp"
#include "calspread/spreadexec.hpp"

#include "clf_properties.hpp"
#include "hawkes_checks.hpp"
#include "pairing_oracle.hpp"
#include "spa_checks.hpp"
#include "support.hpp"
#include "synth_checks.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <unistd.h>

using namespace calspread;
using namespace calspread::literals;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

int failures = 0;

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

void criterion(int id, const std::string& name, const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail += " exception: " + std::string(e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail << " (" << fmt(secs, 1)
              << " s)" << std::endl;
}

bool worked_examples(std::string& d) {
    const auto ee = entry_exit_profit(17514.20_inr, 17458.55_inr, 17510.00_inr, 17460.00_inr);
    const auto c = realized_spread_and_slippage(Leg::Current, 17514.2_inr, 17458_inr, 58.5_inr);
    const auto n = realized_spread_and_slippage(Leg::Next, 17458.55_inr, 17516.55_inr, 58.5_inr);
    d = "entry " + ee.entry.to_string() + " exit " + ee.exit.to_string() + " profit " + ee.profit.to_string() +
        "; F_c reference " + c.realized.to_string() + " / " + c.slippage.to_string() + "; F_n reference " +
        n.realized.to_string() + " / " + n.slippage.to_string();
    return ee.entry == 55.65_inr && ee.exit == 50.00_inr && ee.profit == 5.65_inr && c.realized == 56.2_inr &&
           c.slippage == 2.3_inr && n.realized == 58.0_inr && n.slippage == 0.5_inr;
}

bool hawkes_recovery(std::string& d) {
    const auto r1 = recovery_1d();
    const auto r2 = recovery_2d();
    const auto em = em_recovery(10, 0.1);
    const double norm_err = rel_err(em.norm, em.true_norm);
    d = "1-D max rel err " + fmt(r1.max_error) + ", 2-D " + fmt(r2.max_error) + " (bound 0.10); EM worst bin " +
        fmt(em.worst_bin_error) + " over " + std::to_string(em.bins_checked) + " bins (bound 0.20), norm err " +
        fmt(norm_err) + " (bound 0.15)";
    return r1.max_error <= 0.10 && r2.max_error <= 0.10 && em.bins_checked >= 3 && em.worst_bin_error <= 0.20 &&
           norm_err <= 0.15;
}

bool thinning(std::string& d) {
    const auto t = thinning_calibration();
    const double rate_err = rel_err(t.rate, t.expected_rate);
    const double z = std::abs(t.poisson_mean - t.poisson_expected) / t.poisson_se;
    d = "rate " + fmt(t.rate) + " vs " + fmt(t.expected_rate) + " (rel err " + fmt(rate_err) +
        ", bound 0.05); Poisson mean " + fmt(t.poisson_mean, 3) + " vs " + fmt(t.poisson_expected, 1) + " (" +
        fmt(z, 2) + " SE, bound 3); KS " + fmt(t.ks) + " vs critical " + fmt(t.ks_critical);
    return rate_err <= 0.05 && z <= 3.0 && t.ks < t.ks_critical;
}

bool oracle_equivalence(std::string& d) {
    const auto r = synth_run(std::string(CALSPREAD_CONFIGS) + "/synth_labeled.json");
    const auto seen = observed_oracle(r.market, r.job.plant.grid, r.job.plant.pairing);
    const auto t = compare_oracle(r.market.expected_oracle, seen);
    const auto bf = greedy_vs_brute_force(20'000, 6, 4001);
    d = std::to_string(t.windows) + " windows (" + std::to_string(t.planted) + " planted), " +
        std::to_string(t.mismatches) + " mismatches; greedy vs brute force " + std::to_string(bf.instances) +
        " instances, " + std::to_string(bf.mismatches) + " mismatches";
    return t.windows >= 1000 && t.mismatches == 0 && bf.mismatches == 0;
}

bool clf_properties(std::string& d) {
    const auto p = clf_monotonicity(10'000, 5001);
    // Hand-derived from the displayed ladders: ln(p_1 / p_{i+1}) / ln(sum of the first i quantities).
    const std::array<double, 4> bid{std::log(17455.0 / 17450.0) / std::log(50.0),
                                    std::log(17455.0 / 17401.1) / std::log(100.0),
                                    std::log(17455.0 / 17376.0) / std::log(200.0),
                                    std::log(17455.0 / 17355.0) / std::log(1000.0)};
    const std::array<double, 4> ask{std::log(17516.55 / 17516.5) / std::log(150.0),
                                    std::log(17516.7 / 17516.5) / std::log(200.0),
                                    std::log(17517.2 / 17516.5) / std::log(250.0),
                                    std::log(17523.4 / 17516.5) / std::log(300.0)};
    const auto feb = feb_book();
    const auto mar = mar_book();
    double worst = 0.0;
    for (std::size_t i = 1; i <= 4; ++i) {
        worst = std::max(worst, rel_err(clf_current_bid(feb, i), bid[i - 1]));
        worst = std::max(worst, rel_err(clf_next_ask(mar, i), ask[i - 1]));
    }
    d = std::to_string(p.cases) + " property cases, " + std::to_string(p.failures) +
        " failures; worst relative error on the 8 ladder values " + fmt(worst * 1e9, 3) + "e-9 (bound 1e-9)";
    return p.cases >= 10'000 && p.failures == 0 && worst <= 1e-9;
}

bool separation(std::string& d) {
    auto r = synth_run(std::string(CALSPREAD_CONFIGS) + "/synth_separation.json");
    const auto res = run_pipeline(r.config, r.data);
    const auto* h = find_rule(res, rule_name_hawkes(r.config.decision_kernel));
    const auto* b1 = find_rule(res, rule_name_clf(1));
    if (!h || !b1 || !h->agreement || !b1->agreement) {
        d = "missing agreement score";
        return false;
    }
    std::size_t rho_ordered = 0;
    std::size_t rho_defined = 0;
    for (const auto& w : res.windows) {
        if (w.rho_ca && w.rho_nb) {
            ++rho_defined;
            rho_ordered += *w.rho_ca >= *w.rho_nb ? 1 : 0;
        }
    }
    const double gap = h->agreement->score - b1->agreement->score;
    const std::size_t scored = std::min(h->agreement->scored, b1->agreement->scored);
    d = h->rule + " " + fmt(h->agreement->score) + ", " + b1->rule + " " + fmt(b1->agreement->score) + ", gap " +
        fmt(gap) + " (bound 0.05) over " + std::to_string(scored) + " scored windows; rho_ca >= rho_nb in " +
        std::to_string(rho_ordered) + "/" + std::to_string(rho_defined) + " windows";
    return gap >= 0.05 && h->agreement->score > 0.5 && b1->agreement->score > 0.5 && scored >= 500;
}

bool spa(std::string& d) {
    const auto size = spa_calibration(0.0, 500, 7001);
    const auto power = spa_calibration(3.0, 500, 7002);
    d = "size " + fmt(size.rate(), 3) + " in [0.02, 0.09], power " + fmt(power.rate(), 3) + " (bound 0.80), " +
        std::to_string(size.runs) + " runs each";
    return size.runs == 500 && size.rate() >= 0.02 && size.rate() <= 0.09 && power.rate() >= 0.80;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null").c_str()); }

bool determinism(std::string& d) {
    const auto dir = fs::temp_directory_path() / ("calspread_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    const std::string cli = CALSPREAD_CLI;
    const std::string run_cfg = (dir / "run.json").string();
    if (sh(cli + " synth --config " + std::string(CALSPREAD_CONFIGS) + "/synth_small.json --out " + dir.string()) !=
        0) {
        d = "synth command failed";
        return false;
    }
    const int a = sh(cli + " run --config " + run_cfg + " --seed 17 --out " + (dir / "a").string());
    const int b = sh(cli + " run --config " + run_cfg + " --seed 17 --out " + (dir / "b").string());
    const auto ra = slurp(dir / "a" / "records.jsonl");
    const auto rb = slurp(dir / "b" / "records.jsonl");
    const auto na = slurp(dir / "a" / "norms.jsonl");
    const auto nb = slurp(dir / "b" / "norms.jsonl");
    std::size_t lines = 0;
    for (char ch : ra) {
        lines += ch == '\n' ? 1 : 0;
    }
    const bool ok = a == 0 && b == 0 && !ra.empty() && ra == rb && na == nb;
    d = "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", records.jsonl " + std::to_string(lines) +
        " lines " + (ra == rb ? "identical" : "DIFFER") + ", norms.jsonl " + (na == nb ? "identical" : "DIFFER");
    fs::remove_all(dir);
    return ok;
}

} // namespace

int main() {
    criterion(1, "worked-example goldens", worked_examples);
    criterion(2, "Hawkes recovery", hawkes_recovery);
    criterion(3, "thinning calibration", thinning);
    criterion(4, "oracle equivalence", oracle_equivalence);
    criterion(5, "CLF properties", clf_properties);
    criterion(6, "decision-rule separation", separation);
    criterion(7, "SPA calibration", spa);
    criterion(8, "determinism", determinism);
    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
    return failures == 0 ? 0 : 1;
}
