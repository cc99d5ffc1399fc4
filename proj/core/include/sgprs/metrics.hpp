#pragma once

#include <sgprs/engine.hpp>

#include <map>
#include <span>
#include <vector>

namespace sgprs {

struct TaskMetrics {
    TaskId task = 0;
    double fps = 0.0;
    double dmr = 0.0;
    std::uint64_t completed = 0;
    std::uint64_t missed = 0;
};

struct RunMetrics {
    double total_fps = 0.0;
    double dmr = 0.0;
    std::uint64_t jobs_released = 0;    ///< over the whole run
    std::uint64_t jobs_completed = 0;   ///< over the whole run
    std::uint64_t jobs_evaluated = 0;   ///< deadline inside the measurement window
    std::uint64_t jobs_missed = 0;      ///< among the evaluated jobs
    std::uint64_t stage_misses = 0;     ///< auxiliary: stage-level deadline misses over the run
    std::vector<TaskMetrics> per_task;
};

/// Completions (met or late) in (warmup, horizon] per second of window.
double total_fps(std::span<const JobOutcome> jobs, Millis warmup, Millis horizon);

/// Fraction of jobs with deadline in (warmup, horizon] that finished late or
/// not at all. Zero when no deadline falls in the window.
double dmr(std::span<const JobOutcome> jobs, Millis warmup, Millis horizon);

RunMetrics compute_metrics(const SimResult& result);

/// Largest n such that every run with m <= n tasks had no misses. Keys must be
/// contiguous and start at 0 or 1; returns 0 if the first positive count misses.
std::size_t pivot_point(const std::map<std::size_t, double>& dmr_by_tasks);
std::size_t pivot_point(const std::map<std::size_t, RunMetrics>& sweep);

}  // namespace sgprs
