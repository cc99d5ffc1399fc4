#pragma once

#include <sgprs/metrics.hpp>
#include <sgprs/scenario.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sgprs {

struct RunRecord {
    Scenario scenario;
    std::string label;  ///< variant label, e.g. sgprs_1.5
    RunMetrics metrics;
    std::uint64_t trace_hash = 0;
    double max_work_error = 0.0;
    double max_allocated_sms = 0.0;
    std::vector<TraceRecord> trace;
    std::string error;  ///< non-empty if the run failed

    bool ok() const { return error.empty(); }
};

struct SweepOptions {
    unsigned jobs = 1;  ///< concurrent runs
    bool keep_trace = false;
};

/// Runs every scenario; results keep input order regardless of `jobs`.
/// A failing run is recorded with its error and does not stop the sweep.
std::vector<RunRecord> run_sweep(const std::vector<Scenario>& scenarios, const SweepOptions& options = {});

/// (scenario id, variant label)
using SeriesKey = std::pair<std::string, std::string>;

/// Pivot per series; failed runs count as misses.
std::map<SeriesKey, std::size_t> sweep_pivots(const std::vector<RunRecord>& records);

/// One row of the results CSV.
struct CsvRow {
    std::string scenario_id;
    std::string scheduler;
    std::uint32_t n_contexts = 0;
    double os = 1.0;
    std::uint32_t n_tasks = 0;
    double total_fps = 0.0;
    double dmr = 0.0;
    std::uint64_t jobs_released = 0;
    std::uint64_t jobs_missed = 0;
    bool pivot_flag = false;
};

inline constexpr const char* kCsvHeader =
    "scenario_id,scheduler,n_contexts,os,n_tasks,total_fps,dmr,jobs_released,jobs_missed,pivot_flag";

std::vector<CsvRow> to_rows(const std::vector<RunRecord>& records);
void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);
/// Throws ModelError on a malformed file.
std::vector<CsvRow> read_csv(std::istream& in);

struct PivotSummary {
    std::string scenario_id;
    std::string scheduler;
    std::uint32_t n_contexts = 0;
    double os = 1.0;
    std::size_t pivot = 0;
    double peak_fps = 0.0;
    std::uint32_t max_tasks = 0;
    double fps_at_max = 0.0;
};

/// Pivot per (scenario, scheduler) in first-appearance order.
/// Throws ModelError if a series' task counts are not contiguous.
std::vector<PivotSummary> report_pivots(const std::vector<CsvRow>& rows);
void write_pivot_table(std::ostream& out, const std::vector<PivotSummary>& pivots);
void write_pivot_csv(std::ostream& out, const std::vector<PivotSummary>& pivots);

/// gnuplot-ready `<scenario>_<variant>_fps.dat` and `_dmr.dat` files. Returns the files written.
std::vector<std::filesystem::path> write_series(const std::filesystem::path& dir, const std::vector<CsvRow>& rows);

/// One SVG per scenario with FPS and DMR panels against the task count.
std::vector<std::filesystem::path> write_svg(const std::filesystem::path& dir, const std::vector<CsvRow>& rows);

/// One TSV event trace per run (requires keep_trace).
std::vector<std::filesystem::path> write_traces(const std::filesystem::path& dir, const std::vector<RunRecord>& records);

struct CalibrationOptions {
    double lo_ms = 1.0;
    double hi_ms = 10.0;
    std::size_t target_min = 20;
    std::size_t target_max = 26;
    int max_iterations = 40;
    unsigned jobs = 1;
};

struct CalibrationStep {
    double frame_wcet_ms = 0.0;
    std::size_t best_pivot = 0;
};

struct CalibrationResult {
    double frame_wcet_ms = 0.0;
    std::size_t best_pivot = 0;
    bool converged = false;
    std::vector<CalibrationStep> steps;
};

/// Best pivot over the SGPRS variants of `scenario_runs` with the frame WCET replaced.
std::size_t best_sgprs_pivot(std::vector<Scenario> scenario_runs, double frame_wcet_ms, unsigned jobs = 1);

/// Bisects the frame WCET until the best SGPRS pivot lands in [target_min, target_max].
CalibrationResult calibrate_frame_wcet(const std::vector<Scenario>& scenario_runs,
                                       const CalibrationOptions& options = {});

}  // namespace sgprs
