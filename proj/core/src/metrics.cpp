#include <sgprs/metrics.hpp>

#include <cmath>

namespace sgprs {

namespace {

void check_window(Millis warmup, Millis horizon) {
    if (!(horizon > warmup)) {
        throw ModelError("metrics: measurement window is empty");
    }
}

bool in_window(Millis t, Millis warmup, Millis horizon) {
    return t > warmup && t <= horizon;
}

}  // namespace

double total_fps(std::span<const JobOutcome> jobs, Millis warmup, Millis horizon) {
    check_window(warmup, horizon);
    std::uint64_t frames = 0;
    for (const JobOutcome& j : jobs) {
        if (j.completion && in_window(*j.completion, warmup, horizon)) {
            ++frames;
        }
    }
    return static_cast<double>(frames) / ((horizon - warmup) / 1000.0);
}

double dmr(std::span<const JobOutcome> jobs, Millis warmup, Millis horizon) {
    check_window(warmup, horizon);
    std::uint64_t due = 0;
    std::uint64_t missed = 0;
    for (const JobOutcome& j : jobs) {
        if (!in_window(j.deadline, warmup, horizon)) {
            continue;
        }
        ++due;
        if (j.missed()) {
            ++missed;
        }
    }
    return due == 0 ? 0.0 : static_cast<double>(missed) / static_cast<double>(due);
}

RunMetrics compute_metrics(const SimResult& result) {
    const Millis warmup = result.warmup;
    const Millis horizon = result.horizon;
    check_window(warmup, horizon);
    RunMetrics m;
    m.total_fps = total_fps(result.jobs, warmup, horizon);
    m.stage_misses = result.stage_misses;
    m.per_task.resize(result.n_tasks);
    std::vector<std::uint64_t> due(result.n_tasks, 0);
    for (std::size_t t = 0; t < result.n_tasks; ++t) {
        m.per_task[t].task = static_cast<TaskId>(t);
    }
    for (const JobOutcome& j : result.jobs) {
        ++m.jobs_released;
        TaskMetrics& tm = m.per_task.at(j.task);
        if (j.completion) {
            ++m.jobs_completed;
            if (in_window(*j.completion, warmup, horizon)) {
                ++tm.completed;
            }
        }
        if (in_window(j.deadline, warmup, horizon)) {
            ++m.jobs_evaluated;
            ++due[j.task];
            if (j.missed()) {
                ++m.jobs_missed;
                ++tm.missed;
            }
        }
    }
    m.dmr = m.jobs_evaluated == 0 ? 0.0 : static_cast<double>(m.jobs_missed) / static_cast<double>(m.jobs_evaluated);
    const double window_s = (horizon - warmup) / 1000.0;
    for (std::size_t t = 0; t < result.n_tasks; ++t) {
        TaskMetrics& tm = m.per_task[t];
        tm.fps = static_cast<double>(tm.completed) / window_s;
        tm.dmr = due[t] == 0 ? 0.0 : static_cast<double>(tm.missed) / static_cast<double>(due[t]);
    }
    return m;
}

std::size_t pivot_point(const std::map<std::size_t, double>& dmr_by_tasks) {
    if (dmr_by_tasks.empty()) {
        throw ModelError("pivot_point: empty sweep");
    }
    const std::size_t first = dmr_by_tasks.begin()->first;
    if (first > 1) {
        throw ModelError("pivot_point: sweep must start at 0 or 1 tasks");
    }
    std::size_t expected = first;
    for (const auto& [n, _] : dmr_by_tasks) {
        if (n != expected++) {
            throw ModelError("pivot_point: task counts are not contiguous");
        }
    }
    std::size_t pivot = 0;
    for (const auto& [n, rate] : dmr_by_tasks) {
        if (rate > 0.0) {
            break;
        }
        pivot = n;
    }
    return pivot;
}

std::size_t pivot_point(const std::map<std::size_t, RunMetrics>& sweep) {
    std::map<std::size_t, double> rates;
    for (const auto& [n, m] : sweep) {
        rates.emplace(n, m.dmr);
    }
    return pivot_point(rates);
}

}  // namespace sgprs
