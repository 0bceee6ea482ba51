// kgcal command-line front end. Every subcommand reads the experiment config
// (or built-in defaults), so files produced by one command line up with the
// next: gen-graph -> gen-workload -> calibrate -> run -> report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kgcal/config.hpp"
#include "kgcal/error.hpp"
#include "kgcal/experiment.hpp"
#include "kgcal/report.hpp"

namespace fs = std::filesystem;
using namespace kgcal;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    cmd->add_option("--config", c.config, "Experiment config (JSON)");
    cmd->add_option("--seed", c.seed, "Override the master seed");
    auto* out = cmd->add_option("--out", c.out, "Output file");
    if (out_required) out->required();
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

double pick_incompleteness(const ExperimentConfig& cfg, std::optional<double> flag) {
    return flag ? *flag : cfg.incompleteness.front();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    return out;
}

CsvHeader header_for(const ExperimentConfig& cfg) {
    return {{seed_plan(cfg).describe()}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kgcal: risk-calibrated multi-hop query execution over incomplete knowledge graphs"};
    app.require_subcommand(1);

    Common gg, gw, cal, run, base, rep, exp;
    std::optional<double> gg_inc, gw_inc, cal_inc, run_inc, base_inc;
    std::string gw_topology, gw_split = "eval";
    std::string run_table_path, run_workload, run_trace, base_workload, rep_in, exp_tables;
    bool exp_quiet = false;

    auto* c_gg = app.add_subcommand("gen-graph", "Write a graph snapshot (manifest + triple file)");
    add_common(c_gg, gg, true);
    c_gg->add_option("--incompleteness", gg_inc, "Fraction of edges hidden from the observed view");

    auto* c_gw = app.add_subcommand("gen-workload", "Write a query workload as JSON lines");
    add_common(c_gw, gw, true);
    c_gw->add_option("--topology", gw_topology, "1p, 3p, 2u or 2ip (default: first configured)");
    c_gw->add_option("--split", gw_split, "opt, valid, eval or all")->check(CLI::IsMember({"opt", "valid", "eval", "all"}));

    auto* c_cal = app.add_subcommand("calibrate", "Calibrate thresholds for every topology and budget");
    add_common(c_cal, cal, true);
    c_cal->add_option("--incompleteness", cal_inc, "Incompleteness level (default: first configured)");

    auto* c_run = app.add_subcommand("run", "Execute a workload with calibrated thresholds");
    add_common(c_run, run, true);
    c_run->add_option("--table", run_table_path, "Calibration table")->required();
    c_run->add_option("--workload", run_workload, "Workload (JSON lines)")->required();
    c_run->add_option("--incompleteness", run_inc, "Incompleteness level (default: first configured)");
    c_run->add_option("--trace", run_trace, "Write per-query execution traces (JSON lines)");

    auto* c_base = app.add_subcommand("baseline", "Execute a workload with the static baselines");
    add_common(c_base, base, true);
    c_base->add_option("--workload", base_workload, "Workload (JSON lines)")->required();
    c_base->add_option("--incompleteness", base_inc, "Incompleteness level (default: first configured)");

    auto* c_rep = app.add_subcommand("report", "Print comparison tables for a results CSV");
    add_common(c_rep, rep, false);
    c_rep->add_option("--in", rep_in, "Results CSV")->required();

    auto* c_exp = app.add_subcommand("experiment", "Run the full calibrate-and-evaluate sweep");
    add_common(c_exp, exp, true);
    c_exp->add_option("--tables", exp_tables, "Directory for per-incompleteness calibration tables");
    c_exp->add_flag("--quiet", exp_quiet, "Suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "kgcal: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*c_gg) {
            const auto cfg = load(gg);
            Environment env(cfg);
            const double f = gg_inc.value_or(0.0);
            env.set_incompleteness(f);
            save_snapshot(env.graph(), gg.out, {env.seeds().graph, f, env.seeds().drop});
        } else if (*c_gw) {
            const auto cfg = load(gw);
            Environment env(cfg);
            const auto topology = gw_topology.empty() ? cfg.topologies.front() : parse_topology(gw_topology);
            auto splits = make_splits(env, cfg, topology);
            std::vector<QueryInstance> w;
            if (gw_split == "opt" || gw_split == "all") w.insert(w.end(), splits.opt.begin(), splits.opt.end());
            if (gw_split == "valid" || gw_split == "all") w.insert(w.end(), splits.valid.begin(), splits.valid.end());
            if (gw_split == "eval" || gw_split == "all") w.insert(w.end(), splits.eval.begin(), splits.eval.end());
            write_workload(gw.out, w);
        } else if (*c_cal) {
            const auto cfg = load(cal);
            Environment env(cfg);
            env.set_incompleteness(pick_incompleteness(cfg, cal_inc));
            const auto table = calibrate_table(env, cfg);
            for (const auto* e : table.entries()) {
                if (!e->feasible) {
                    std::cerr << "kgcal: warning: " << to_string(e->topology) << " alpha=" << e->alpha
                              << " is infeasible; stored the most permissive thresholds\n";
                }
            }
            write_table(cal.out, table);
        } else if (*c_run) {
            const auto cfg = load(run);
            Environment env(cfg);
            env.set_incompleteness(pick_incompleteness(cfg, run_inc));
            const auto table = read_table(run_table_path);
            const auto workload = read_workload(run_workload, env.graph());
            std::optional<std::ofstream> traces;
            if (!run_trace.empty()) traces = open_out(run_trace);
            const auto rows = run_table(table, workload, env, cfg.workers, traces ? &*traces : nullptr);
            write_results(run.out, rows, header_for(cfg));
        } else if (*c_base) {
            const auto cfg = load(base);
            Environment env(cfg);
            env.set_incompleteness(pick_incompleteness(cfg, base_inc));
            const auto workload = read_workload(base_workload, env.graph());
            write_results(base.out, run_static_baselines(cfg, workload, env), header_for(cfg));
        } else if (*c_rep) {
            const auto rows = read_results(fs::path(rep_in));
            const auto text = render(compare_report(rows));
            if (rep.out.empty()) {
                std::cout << text;
            } else {
                open_out(rep.out) << text;
            }
        } else if (*c_exp) {
            const auto cfg = load(exp);
            const auto out = run_experiment(cfg, [&](const std::string& msg) {
                if (!exp_quiet) std::cerr << "kgcal: " << msg << '\n';
            });
            for (const auto& w : out.warnings) std::cerr << "kgcal: warning: " << w << '\n';
            write_results(exp.out, out.rows, {{out.seeds}});
            if (!exp_tables.empty()) {
                fs::create_directories(exp_tables);
                for (const auto& [f, table] : out.tables) {
                    write_table(fs::path(exp_tables) / ("calibration_" + format_number(f) + ".json"), table);
                }
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "kgcal: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
