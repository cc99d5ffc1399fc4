// sgprs-sim: run scheduling sweeps, summarize pivots, calibrate the frame WCET.
//
// Exit codes: 0 success, 1 one or more runs failed, 2 configuration/usage error.

#include <sgprs/config.hpp>
#include <sgprs/sweep.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

struct SimulateArgs {
    std::string config;
    std::string out = "results";
    bool trace = false;
    bool svg = false;
    unsigned jobs = 1;
};

struct ReportArgs {
    std::string csv;
    std::string out;
};

struct CalibrateArgs {
    std::string config;
    std::string scenario;
    double lo = 1.0;
    double hi = 10.0;
    std::size_t min_pivot = 20;
    std::size_t max_pivot = 26;
    unsigned jobs = 1;
};

int run_simulate(const SimulateArgs& args) {
    std::vector<sgprs::Scenario> scenarios;
    try {
        scenarios = sgprs::parse_config(args.config);
    } catch (const sgprs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    std::cerr << "running " << scenarios.size() << " simulations with " << args.jobs << " job(s)\n";
    const auto records = sgprs::run_sweep(scenarios, {args.jobs, args.trace});

    int failures = 0;
    for (const auto& r : records) {
        if (!r.ok()) {
            ++failures;
            std::cerr << "run failed: " << r.scenario.id << ' ' << r.label << " n_tasks=" << r.scenario.n_tasks
                      << ": " << r.error << '\n';
        }
    }

    const std::filesystem::path out(args.out);
    std::filesystem::create_directories(out);
    const auto rows = sgprs::to_rows(records);
    {
        std::ofstream csv(out / "results.csv");
        sgprs::write_csv(csv, rows);
    }
    sgprs::write_series(out / "series", rows);
    if (args.svg) {
        sgprs::write_svg(out / "plots", rows);
    }
    if (args.trace) {
        sgprs::write_traces(out / "traces", records);
    }
    try {
        const auto pivots = sgprs::report_pivots(rows);
        std::ofstream pcsv(out / "pivots.csv");
        sgprs::write_pivot_csv(pcsv, pivots);
        sgprs::write_pivot_table(std::cout, pivots);
    } catch (const sgprs::ModelError& e) {
        std::cerr << "pivot report skipped: " << e.what() << '\n';
    }
    std::cerr << "wrote " << (out / "results.csv").string() << '\n';
    return failures == 0 ? kExitOk : kExitRunFailure;
}

int run_report(const ReportArgs& args) {
    std::ifstream in(args.csv);
    if (!in) {
        std::cerr << "cannot open " << args.csv << '\n';
        return kExitConfigError;
    }
    try {
        const auto pivots = sgprs::report_pivots(sgprs::read_csv(in));
        sgprs::write_pivot_table(std::cout, pivots);
        if (!args.out.empty()) {
            std::ofstream out(args.out);
            sgprs::write_pivot_csv(out, pivots);
        }
    } catch (const sgprs::ModelError& e) {
        std::cerr << "report error: " << e.what() << '\n';
        return kExitConfigError;
    }
    return kExitOk;
}

int run_calibrate(const CalibrateArgs& args) {
    std::vector<sgprs::Scenario> runs;
    try {
        runs = sgprs::parse_config(args.config);
    } catch (const sgprs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    if (!args.scenario.empty()) {
        std::erase_if(runs, [&](const sgprs::Scenario& s) { return s.id != args.scenario; });
    }
    if (runs.empty()) {
        std::cerr << "no runs for scenario '" << args.scenario << "'\n";
        return kExitConfigError;
    }
    sgprs::CalibrationOptions opts;
    opts.lo_ms = args.lo;
    opts.hi_ms = args.hi;
    opts.target_min = args.min_pivot;
    opts.target_max = args.max_pivot;
    opts.jobs = args.jobs;
    sgprs::CalibrationResult result;
    try {
        result = sgprs::calibrate_frame_wcet(runs, opts);
    } catch (const std::exception& e) {
        std::cerr << "calibration failed: " << e.what() << '\n';
        return kExitRunFailure;
    }
    for (const auto& step : result.steps) {
        std::printf("frame_wcet_ms=%.6f best_pivot=%zu\n", step.frame_wcet_ms, step.best_pivot);
    }
    std::printf("%s frame_wcet_ms = %.6f (best SGPRS pivot %zu)\n", result.converged ? "calibrated" : "not converged",
                result.frame_wcet_ms, result.best_pivot);
    return result.converged ? kExitOk : kExitRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-event simulator for real-time multi-tenant DNN inference on a partitioned GPU"};
    app.require_subcommand(1);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run every scenario of a config and write CSV/series output");
    simulate->add_option("--config", sim.config, "Scenario config file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();
    simulate->add_flag("--trace", sim.trace, "Write one TSV event trace per run");
    simulate->add_flag("--svg", sim.svg, "Render SVG charts per scenario");
    simulate->add_option("--jobs", sim.jobs, "Concurrent runs")->check(CLI::Range(1u, 4096u))->default_val(hw);

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "Print pivot points from a results CSV");
    report->add_option("--csv", rep.csv, "results.csv from a previous simulate")->required();
    report->add_option("--out", rep.out, "Also write the pivot summary as CSV");

    CalibrateArgs cal;
    auto* calibrate = app.add_subcommand("calibrate", "Bisect the frame WCET until the best SGPRS pivot is in range");
    calibrate->add_option("--config", cal.config, "Scenario config file")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--scenario", cal.scenario, "Scenario id to calibrate against");
    calibrate->add_option("--lo", cal.lo, "Lower WCET bracket (ms)")->capture_default_str();
    calibrate->add_option("--hi", cal.hi, "Upper WCET bracket (ms)")->capture_default_str();
    calibrate->add_option("--min-pivot", cal.min_pivot, "Lowest acceptable pivot")->capture_default_str();
    calibrate->add_option("--max-pivot", cal.max_pivot, "Highest acceptable pivot")->capture_default_str();
    calibrate->add_option("--jobs", cal.jobs, "Concurrent runs")->check(CLI::Range(1u, 4096u))->default_val(hw);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    if (*simulate) {
        return run_simulate(sim);
    }
    if (*report) {
        return run_report(rep);
    }
    return run_calibrate(cal);
}
