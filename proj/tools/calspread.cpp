// calspread: ingest, run, report and synth commands over one JSON config.

#include "calspread/pipeline.hpp"
#include "calspread/synth_config.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace calspread;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> windows;
    std::optional<std::string> kernel;
    std::optional<std::size_t> clf_depth;
    std::optional<std::string> vote;
    std::optional<std::size_t> threads;
};

RunConfig load_run_config(const std::string& path, const Overrides& o) {
    const auto j = synth::read_json_file(path);
    RunConfig cfg = run_config_from_json(j, fs::path(path).parent_path());
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.out) {
        cfg.out_dir = *o.out;
    }
    if (o.windows) {
        cfg.max_windows = *o.windows;
    }
    if (o.kernel) {
        cfg.decision_kernel = hawkes::kernel_kind_from_string(*o.kernel);
    }
    if (o.clf_depth) {
        cfg.clf.depth = *o.clf_depth;
    }
    if (o.vote) {
        cfg.clf.mode = *o.vote == "ema" ? VoteMode::Ema : VoteMode::Majority;
    }
    if (o.threads) {
        cfg.threads = *o.threads;
    }
    validate(cfg);
    return cfg;
}

void print_ingest(const IngestReport& r, std::ostream& os) {
    static constexpr std::array<const char*, 7> labels{"T_A", "T_B", "C_A", "C_B", "PDM_A", "PDM_B", "Other"};
    static constexpr std::array<const char*, 4> kinds{"New", "Modify", "Cancel", "Trade"};
    os << "type\tF_c\tF_n\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        os << labels[i] << "\t" << r.labels_c[i] << "\t" << r.labels_n[i] << "\n";
    }
    os << "\nkind\tF_c\tF_n\n";
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        os << kinds[i] << "\t" << r.kinds_c[i] << "\t" << r.kinds_n[i] << "\n";
    }
    os << "\nevents before book warm-up\t" << r.stats_c.unavailable << "\t" << r.stats_n.unavailable << "\n";
}

int cmd_ingest(const RunConfig& cfg) {
    const auto market = load_market(cfg);
    const auto cm = classify_market(market, cfg.book_depth);
    const auto rep = ingest_report(cm);
    print_ingest(rep, std::cout);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    {
        auto f = open_out(dir / "current.csv");
        write_ticks(f, market.current);
    }
    {
        auto f = open_out(dir / "next.csv");
        write_ticks(f, market.next);
    }
    auto f = open_out(dir / "ingest.txt");
    print_ingest(rep, f);
    return 0;
}

int cmd_run(const RunConfig& cfg) {
    const auto market = load_market(cfg);
    std::vector<std::pair<BookSnapshot, BookSnapshot>> snaps;
    const auto res = run_pipeline(cfg, market, cfg.dump_snapshots ? &snaps : nullptr);
    write_run(res, cfg, cfg.dump_snapshots ? &snaps : nullptr);
    std::cout << report_text(summary_json(res, cfg));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference-leg selection for calendar spread quoting"};
    app.require_subcommand(1);

    std::string config;
    Overrides o;
    auto add_run_flags = [&](CLI::App* sub, bool full) {
        sub->add_option("--config", config, "JSON run config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        if (!full) {
            return;
        }
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--windows", o.windows, "cap on the number of decision windows");
        sub->add_option("--kernel", o.kernel, "decision kernel")->check(CLI::IsMember({"exp", "sumexp", "em"}));
        sub->add_option("--clf-depth", o.clf_depth, "CLF depth reported as chi_b")->check(CLI::Range(1, 4));
        sub->add_option("--vote", o.vote, "CLF vote")->check(CLI::IsMember({"ema", "majority"}));
        sub->add_option("--threads", o.threads, "worker threads");
    };

    auto* ingest = app.add_subcommand("ingest", "parse and classify both tick files, print type counts");
    add_run_flags(ingest, false);
    auto* run = app.add_subcommand("run", "fit, forecast, decide and benchmark over the window grid");
    add_run_flags(run, true);

    std::string run_dir;
    auto* report = app.add_subcommand("report", "summarize a run directory and write plot-ready series");
    report->add_option("dir", run_dir, "run output directory");
    report->add_option("--out", run_dir, "run output directory");

    std::string synth_config;
    std::string synth_out;
    std::optional<std::uint64_t> synth_seed;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic two-contract market");
    synth_cmd->add_option("--config", synth_config, "JSON synth config")->required()->check(CLI::ExistingFile);
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            auto cfg = load_run_config(config, o);
            return cmd_ingest(cfg);
        }
        if (*run) {
            return cmd_run(load_run_config(config, o));
        }
        if (*report) {
            if (run_dir.empty()) {
                std::cerr << "error: report needs a run directory\n";
                return 1;
            }
            std::cout << report_run(run_dir);
            return 0;
        }
        if (*synth_cmd) {
            auto job = synth::synth_job_from_json(synth::read_json_file(synth_config));
            if (synth_seed) {
                job.market.seed = *synth_seed;
            }
            const auto m = synth::generate(job);
            synth::write_job_outputs(synth_out, job, m);
            std::cout << "wrote " << m.current.events.size() << " F_c rows and " << m.next.events.size()
                      << " F_n rows to " << synth_out;
            if (!m.expected_oracle.empty()) {
                std::cout << " (" << m.planted_pairs << " planted pairs, " << m.decoys << " decoys)";
            }
            std::cout << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
