#include <sgprs/scenario.hpp>

#include <sgprs/naive_scheduler.hpp>

#include <cmath>
#include <cstdio>
#include <numeric>

namespace sgprs {

const char* to_string(SchedulerKind kind) {
    return kind == SchedulerKind::Naive ? "naive" : "sgprs";
}

std::string variant_label(const Scenario& s) {
    if (s.scheduler == SchedulerKind::Naive) {
        return "naive";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "sgprs_%.1f", s.pool.over_subscription);
    return buf;
}

void validate_scenario(const Scenario& s) {
    const std::string where = "scenario '" + s.id + "': ";
    const TaskTemplate& t = s.task;
    if (t.stage_count == 0) {
        throw ModelError(where + "stages must be >= 1");
    }
    if (!t.stage_weights.empty() && t.stage_weights.size() != t.stage_count) {
        throw ModelError(where + "stage_weights must have one entry per stage");
    }
    for (double w : t.stage_weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw ModelError(where + "stage weights must be positive");
        }
    }
    if (t.stage_curves.size() != 1 && t.stage_curves.size() != t.stage_count) {
        throw ModelError(where + "stage_curve must name one curve or one per stage");
    }
    for (const std::string& id : t.stage_curves) {
        if (!s.curves.contains(id)) {
            throw ModelError(where + "unknown curve '" + id + "'");
        }
    }
    if (!(t.frame_wcet_ms > 0.0) || !std::isfinite(t.frame_wcet_ms)) {
        throw ModelError(where + "frame_wcet_ms must be > 0");
    }
    if (!(t.reference_sms > 0.0)) {
        throw ModelError(where + "reference_sms must be > 0");
    }
    if (!(t.fps > 0.0) || !std::isfinite(t.fps)) {
        throw ModelError(where + "fps must be > 0");
    }
    if (t.deadline_ms && !(*t.deadline_ms > 0.0)) {
        throw ModelError(where + "deadline_ms must be > 0");
    }
    if (!(t.stage_overhead_ms >= 0.0)) {
        throw ModelError(where + "stage_overhead_ms must be >= 0");
    }
    if (!(s.warmup_s >= 0.0) || !(s.horizon_s > s.warmup_s)) {
        throw ModelError(where + "horizon must exceed warmup");
    }
    // Throws on invalid pool parameters.
    build_context_pool(s.pool.total_sms, s.pool.contexts, s.pool.over_subscription);
}

std::vector<Task> build_tasks(const Scenario& s) {
    validate_scenario(s);
    const TaskTemplate& t = s.task;
    std::vector<double> weights = t.stage_weights;
    if (weights.empty()) {
        weights.assign(t.stage_count, 1.0);
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<Millis> wcets;
    std::vector<std::string> curves;
    for (std::uint32_t j = 0; j < t.stage_count; ++j) {
        wcets.push_back(t.frame_wcet_ms * weights[j] / total + t.stage_overhead_ms);
        curves.push_back(t.stage_curves.size() == 1 ? t.stage_curves[0] : t.stage_curves[j]);
    }
    const Millis period = t.period_ms();
    const Millis deadline = t.deadline_ms.value_or(period);
    std::vector<Task> tasks;
    tasks.reserve(s.n_tasks);
    for (std::uint32_t i = 0; i < s.n_tasks; ++i) {
        tasks.push_back(prepare_task(make_task(i, wcets, curves, period, deadline, t.reference_sms)));
    }
    return tasks;
}

SimInput build_input(const Scenario& s) {
    SimInput in;
    in.tasks = build_tasks(s);
    in.pool = build_context_pool(s.pool.total_sms, s.pool.contexts, s.pool.over_subscription);
    in.curves = s.curves;
    in.horizon = s.horizon_s * 1000.0;
    in.warmup = s.warmup_s * 1000.0;
    return in;
}

std::unique_ptr<SchedulerPolicy> make_policy(const Scenario& s) {
    if (s.scheduler == SchedulerKind::Naive) {
        return std::make_unique<NaiveScheduler>();
    }
    return std::make_unique<SgprsScheduler>(SgprsOptions{s.flags.slot_borrowing, s.flags.queue_metric});
}

EngineOptions engine_options(const Scenario& s, bool keep_trace) {
    EngineOptions o;
    o.keep_trace = keep_trace;
    o.drop_on_overrun = s.flags.drop_on_overrun;
    return o;
}

SimResult run_scenario(const Scenario& s, bool keep_trace) {
    auto policy = make_policy(s);
    return simulate(build_input(s), *policy, engine_options(s, keep_trace));
}

}  // namespace sgprs
