#include <sgprs/model.hpp>

#include <cmath>
#include <string>

namespace sgprs {

const char* to_string(BasePriority p) {
    return p == BasePriority::High ? "high" : "low";
}

const char* to_string(PriorityLevel p) {
    switch (p) {
    case PriorityLevel::High:
        return "high";
    case PriorityLevel::Medium:
        return "medium";
    case PriorityLevel::Low:
        return "low";
    }
    return "?";
}

const char* to_string(StageState s) {
    switch (s) {
    case StageState::NotReleased:
        return "not_released";
    case StageState::Waiting:
        return "waiting";
    case StageState::Running:
        return "running";
    case StageState::Done:
        return "done";
    }
    return "?";
}

namespace {

bool positive_finite(double v) {
    return std::isfinite(v) && v > 0.0;
}

}  // namespace

Task make_task(TaskId id,
               std::span<const Millis> stage_wcets,
               std::span<const std::string> stage_curves,
               Millis period,
               Millis relative_deadline,
               double reference_sms) {
    if (stage_wcets.size() != stage_curves.size()) {
        throw ModelError("make_task: stage WCET and curve lists differ in length");
    }
    Task task;
    task.id = id;
    task.period = period;
    task.relative_deadline = relative_deadline;
    task.stages.reserve(stage_wcets.size());
    for (std::size_t j = 0; j < stage_wcets.size(); ++j) {
        Stage s;
        s.task_id = id;
        s.index = static_cast<std::uint32_t>(j + 1);
        s.wcet_ref = stage_wcets[j];
        s.reference_sms = reference_sms;
        s.curve_id = stage_curves[j];
        task.wcet_ref += stage_wcets[j];
        task.stages.push_back(std::move(s));
    }
    validate_task(task);
    return task;
}

void validate_task(const Task& task) {
    const std::string where = "task " + std::to_string(task.id) + ": ";
    if (task.stages.empty()) {
        throw ModelError(where + "has no stages");
    }
    if (!positive_finite(task.period)) {
        throw ModelError(where + "period must be > 0");
    }
    if (!positive_finite(task.relative_deadline)) {
        throw ModelError(where + "relative deadline must be > 0");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < task.stages.size(); ++j) {
        const Stage& s = task.stages[j];
        if (s.task_id != task.id) {
            throw ModelError(where + "stage belongs to task " + std::to_string(s.task_id));
        }
        // Only linear chains are supported: stage j must be the j-th link.
        if (s.index != j + 1) {
            throw ModelError(where + "stage indices must be 1..n in chain order");
        }
        if (!positive_finite(s.wcet_ref)) {
            throw ModelError(where + "stage " + std::to_string(s.index) + " WCET must be > 0");
        }
        if (!positive_finite(s.reference_sms)) {
            throw ModelError(where + "stage " + std::to_string(s.index) + " reference SM count must be > 0");
        }
        sum += s.wcet_ref;
    }
    if (std::abs(sum - task.wcet_ref) > 1e-9 * sum) {
        throw ModelError(where + "task WCET must equal the sum of stage WCETs");
    }
}

Task assign_priorities(Task task) {
    if (task.stages.empty()) {
        throw ModelError("assign_priorities: task has no stages");
    }
    for (Stage& s : task.stages) {
        s.base_priority = BasePriority::Low;
    }
    task.stages.back().base_priority = BasePriority::High;
    return task;
}

Task compute_virtual_deadlines(Task task) {
    validate_task(task);
    double total = 0.0;
    for (const Stage& s : task.stages) {
        total += s.wcet_ref;
    }
    for (Stage& s : task.stages) {
        s.virtual_deadline = task.relative_deadline * (s.wcet_ref / total);
    }
    return task;
}

Task prepare_task(Task task) {
    return compute_virtual_deadlines(assign_priorities(std::move(task)));
}

std::uint64_t ContextPool::configured_sms() const {
    std::uint64_t sum = 0;
    for (const Context& c : contexts) {
        sum += c.sm_count;
    }
    return sum;
}

ContextPool build_context_pool(std::uint32_t total_sms, std::uint32_t n_contexts, double over_subscription) {
    if (n_contexts == 0) {
        throw ModelError("context pool needs at least one context");
    }
    if (total_sms < n_contexts) {
        throw ModelError("context pool: fewer SMs than contexts");
    }
    if (!std::isfinite(over_subscription) || over_subscription < 1.0) {
        throw ModelError("context pool: over-subscription must be >= 1.0");
    }
    const double per_context = std::floor(static_cast<double>(total_sms) * over_subscription / n_contexts);
    if (per_context < 1.0) {
        throw ModelError("context pool: contexts would have zero SMs");
    }
    ContextPool pool;
    pool.total_sms = total_sms;
    pool.over_subscription = over_subscription;
    for (std::uint32_t k = 0; k < n_contexts; ++k) {
        pool.contexts.push_back(Context{k, static_cast<std::uint32_t>(per_context), 2, 2});
    }
    return pool;
}

Job release_job(const Task& task,
                std::uint32_t instance,
                Millis release_time,
                JobIndex job_ref,
                std::span<const double> stage_work) {
    if (!stage_work.empty() && stage_work.size() != task.stages.size()) {
        throw ModelError("release_job: stage work list does not match the stage count");
    }
    Job job;
    job.task_id = task.id;
    job.instance = instance;
    job.release_time = release_time;
    job.absolute_deadline = release_time + task.relative_deadline;
    job.stage_instances.reserve(task.stages.size());

    Millis offset = 0.0;
    for (std::size_t j = 0; j < task.stages.size(); ++j) {
        const Stage& s = task.stages[j];
        if (!s.virtual_deadline) {
            throw ModelError("release_job: task " + std::to_string(task.id) + " has no virtual deadlines");
        }
        offset += *s.virtual_deadline;
        StageInstance si;
        si.job_ref = job_ref;
        si.stage_index = s.index;
        const bool last = j + 1 == task.stages.size();
        si.absolute_deadline = last ? job.absolute_deadline : release_time + offset;
        si.remaining_work = stage_work.empty() ? 0.0 : stage_work[j];
        si.priority_level = s.base_priority == BasePriority::High ? PriorityLevel::High : PriorityLevel::Low;
        si.state = j == 0 ? StageState::Waiting : StageState::NotReleased;
        job.stage_instances.push_back(si);
    }
    return job;
}

}  // namespace sgprs
