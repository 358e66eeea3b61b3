// Experiment driver: single-scenario runs, parameter grids, Pareto fronts
// and summary reports over the event-triggered estimation simulator.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ettreg/experiment.hpp"

namespace fs = std::filesystem;
using namespace ettreg;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("ETTREG_OUT");
    return env ? env : "out";
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int cmd_run(const std::string& config_path, int seeds, const std::string& out_dir,
            int jobs, bool trace) {
    const json config_json = load_json(config_path);
    ScenarioConfig config = scenario_from_json(config_json);
    config.record_trace = trace;
    fs::create_directories(out_dir);

    std::vector<SimResult> results(seeds);
    std::vector<std::string> errors(seeds);
    std::atomic<int> next{0};
    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= seeds) return;
            try {
                results[i] = run_simulation(config, static_cast<std::uint64_t>(i + 1));
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < std::max(1, jobs); ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();

    json summary = json::array();
    double rho_min = std::numeric_limits<double>::infinity();
    double m_mean = 0.0;
    int ok = 0;
    for (int i = 0; i < seeds; ++i) {
        if (!errors[i].empty()) {
            summary.push_back({{"seed", i + 1}, {"error", errors[i]}});
            continue;
        }
        const SimResult& r = results[i];
        ok += 1;
        rho_min = std::min(rho_min, r.rho_min_true);
        m_mean += r.total_events;
        summary.push_back({{"seed", i + 1},
                           {"rho_min_true", r.rho_min_true},
                           {"total_events", r.total_events},
                           {"events", r.events},
                           {"sign_violations", r.sign_violations},
                           {"lane_change_step", r.lane_change_step}});
        if (trace) {
            std::ofstream tf(fs::path(out_dir) /
                             ("trace_seed" + std::to_string(i + 1) + ".csv"));
            write_trace_csv(tf, r);
        }
    }
    if (ok > 0) m_mean /= ok;
    json top{{"config", config_json},
             {"seeds", seeds},
             {"rho_min_true", ok ? rho_min : 0.0},
             {"m_mean", m_mean},
             {"runs", std::move(summary)}};
    write_text(fs::path(out_dir) / "summary.json", top.dump(2) + "\n");
    std::cout << "ran " << ok << "/" << seeds << " seeds, rho_min_true="
              << (ok ? rho_min : 0.0) << ", mean events=" << m_mean << "\n"
              << "results in " << out_dir << "\n";
    return ok == seeds ? 0 : 1;
}

int cmd_grid(const std::string& spec_path, const std::string& out_dir, int jobs) {
    const ExperimentSpec spec = experiment_from_json(load_json(spec_path));
    const std::vector<ExperimentRow> rows = run_grid(spec, jobs);
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "rows.csv");
        write_rows_csv(csv, rows);
    }
    write_text(fs::path(out_dir) / "rows.json", rows_to_json(rows).dump(2) + "\n");
    int feasible = 0;
    for (const ExperimentRow& r : rows) feasible += r.feasible ? 1 : 0;
    std::cout << rows.size() << " cells (" << feasible << " feasible) -> "
              << out_dir << "/rows.csv\n";
    return 0;
}

int cmd_pareto(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open " + in_path);
    const std::vector<ExperimentRow> front = pareto_front(read_rows_csv(in));
    if (out_path.empty()) {
        write_rows_csv(std::cout, front);
    } else {
        std::ofstream out(out_path);
        write_rows_csv(out, front);
        std::cout << front.size() << " non-dominated rows -> " << out_path << "\n";
    }
    return 0;
}

int cmd_report(const std::string& in_path) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open " + in_path);
    const std::vector<ExperimentRow> rows = read_rows_csv(in);
    const SummaryReport report = summarize(rows);

    for (const PolicySummary& p : report.policies) {
        std::cout << p.policy << ": ";
        if (!p.any_feasible) {
            std::cout << "no feasible configuration\n";
            continue;
        }
        std::cout << "best feasible m=" << p.best.m_mean
                  << " +- " << p.best.m_std << " (rho_min=" << p.best.rho_min
                  << ";";
        for (const auto& [path, value] : p.best.params) {
            std::cout << ' ' << path << '=' << value;
        }
        std::cout << ")\n";
    }
    const PolicySummary* cett = report.find("cett");
    const PolicySummary* tt = report.find("tt");
    for (const PolicySummary& p : report.policies) {
        if (!p.any_feasible) continue;
        if (cett && cett->any_feasible && p.policy != "cett") {
            std::cout << p.policy << " vs cett: "
                      << reduction_percent(p.best.m_mean, cett->best.m_mean)
                      << "% fewer events\n";
        }
        if (tt && tt->any_feasible && p.policy != "tt") {
            std::cout << p.policy << " vs tt: "
                      << reduction_percent(p.best.m_mean, tt->best.m_mean)
                      << "% fewer events\n";
        }
    }
    std::cout << "threshold monotonicity violations: "
              << report.monotonicity_violations << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-trigger threshold regulation experiments"};
    app.require_subcommand(1);

    std::string config_path, spec_path, in_path, out_path;
    std::string out_dir = default_out_dir();
    int seeds = 20;
    int jobs = 1;
    bool no_trace = false;

    CLI::App* run = app.add_subcommand("run", "simulate one scenario config");
    run->add_option("--config", config_path, "scenario config JSON")->required();
    run->add_option("--seeds", seeds, "number of seeds (1..N)");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--jobs", jobs, "parallel runs");
    run->add_flag("--no-trace", no_trace, "skip per-step trace CSVs");

    CLI::App* grid = app.add_subcommand("grid", "parameter grid search");
    grid->add_option("--spec", spec_path, "experiment spec JSON")->required();
    grid->add_option("--out", out_dir, "output directory");
    grid->add_option("--jobs", jobs, "parallel cells");

    CLI::App* pareto = app.add_subcommand("pareto", "non-dominated rows");
    pareto->add_option("--in", in_path, "rows.csv from grid")->required();
    pareto->add_option("--out", out_path, "output csv (default stdout)");

    CLI::App* report = app.add_subcommand("report", "summarize grid rows");
    report->add_option("--in", in_path, "rows.csv from grid")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(config_path, seeds, out_dir, jobs, !no_trace);
        }
        if (grid->parsed()) return cmd_grid(spec_path, out_dir, jobs);
        if (pareto->parsed()) return cmd_pareto(in_path, out_path);
        if (report->parsed()) return cmd_report(in_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
