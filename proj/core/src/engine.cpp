#include <sgprs/engine.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <string>

namespace sgprs {

const char* to_string(EventKind kind) {
    switch (kind) {
    case EventKind::StageCompletion:
        return "stage_completion";
    case EventKind::DeadlineCheck:
        return "deadline_check";
    case EventKind::JobRelease:
        return "job_release";
    case EventKind::SimulationEnd:
        return "simulation_end";
    }
    return "?";
}

const char* to_string(SlotClass slot) {
    return slot == SlotClass::High ? "high" : "low";
}

const char* to_string(TraceKind kind) {
    switch (kind) {
    case TraceKind::Release:
        return "release";
    case TraceKind::Assign:
        return "assign";
    case TraceKind::Promote:
        return "promote";
    case TraceKind::Start:
        return "start";
    case TraceKind::Complete:
        return "complete";
    case TraceKind::DeadlineMet:
        return "deadline_met";
    case TraceKind::DeadlineMiss:
        return "deadline_miss";
    case TraceKind::JobDone:
        return "job_done";
    case TraceKind::Drop:
        return "drop";
    case TraceKind::End:
        return "end";
    }
    return "?";
}

bool event_before(const Event& a, const Event& b) {
    if (a.time != b.time) {
        return a.time < b.time;
    }
    if (a.kind != b.kind) {
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    }
    return a.seq < b.seq;
}

std::vector<double> effective_allocation(const ContextPool& pool, std::span<const std::uint32_t> running_counts) {
    if (running_counts.size() != pool.contexts.size()) {
        throw ModelError("effective_allocation: one running count per context required");
    }
    double demand = 0.0;
    for (std::size_t k = 0; k < pool.contexts.size(); ++k) {
        if (running_counts[k] > 0) {
            demand += pool.contexts[k].sm_count;
        }
    }
    std::vector<double> per_stage(pool.contexts.size(), 0.0);
    if (demand == 0.0) {
        return per_stage;
    }
    const double scale = std::min(1.0, static_cast<double>(pool.total_sms) / demand);
    for (std::size_t k = 0; k < pool.contexts.size(); ++k) {
        if (running_counts[k] > 0) {
            per_stage[k] = pool.contexts[k].sm_count * scale / running_counts[k];
        }
    }
    return per_stage;
}

void write_trace_line(std::ostream& out, const TraceRecord& rec) {
    char time[32];
    std::snprintf(time, sizeof time, "%.6f", rec.time);
    out << time << '\t' << to_string(rec.kind) << '\t' << rec.task << '\t' << rec.instance << '\t';
    if (rec.stage >= 0) {
        out << rec.stage;
    } else {
        out << '-';
    }
    out << '\t';
    if (rec.context >= 0) {
        out << rec.context;
    } else {
        out << '-';
    }
    out << '\t';
    switch (rec.kind) {
    case TraceKind::Assign:
    case TraceKind::Promote:
        out << "level=" << to_string(rec.level);
        break;
    case TraceKind::Start:
        out << "level=" << to_string(rec.level) << " slot=" << to_string(rec.slot);
        break;
    case TraceKind::Complete:
    case TraceKind::DeadlineMet:
    case TraceKind::DeadlineMiss:
        out << "level=" << to_string(rec.level);
        break;
    default:
        out << '-';
        break;
    }
    out << '\n';
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void hash_bytes(std::uint64_t& h, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        h ^= (value >> (8 * i)) & 0xffU;
        h *= kFnvPrime;
    }
}

constexpr double kWorkTolerance = 1e-6;
constexpr double kCapacityTolerance = 1e-9;

}  // namespace

Engine::Engine(SimInput input, EngineOptions options) : input_(std::move(input)), options_(options) {
    if (!std::isfinite(input_.horizon) || !std::isfinite(input_.warmup) || input_.warmup < 0.0 ||
        input_.horizon <= input_.warmup) {
        throw SimulationError("simulation horizon must exceed the warmup");
    }
    if (input_.pool.contexts.empty()) {
        throw SimulationError("context pool is empty");
    }
    for (std::size_t i = 0; i < input_.tasks.size(); ++i) {
        const Task& t = input_.tasks[i];
        if (t.id != i) {
            throw SimulationError("task ids must be 0..n-1 in order");
        }
        validate_task(t);
        std::vector<double> work;
        std::vector<const SpeedupCurve*> curves;
        for (const Stage& s : t.stages) {
            if (!s.virtual_deadline) {
                throw SimulationError("task " + std::to_string(t.id) + " has not been through the offline phase");
            }
            const SpeedupCurve& c = input_.curves.at(s.curve_id);
            curves.push_back(&c);
            work.push_back(stage_work(s, c));
        }
        stage_work_.push_back(std::move(work));
        stage_curve_.push_back(std::move(curves));
    }
    const std::size_t n_ctx = input_.pool.contexts.size();
    active_job_.resize(input_.tasks.size());
    backlog_.resize(input_.tasks.size());
    running_by_ctx_.resize(n_ctx);
    waiting_by_ctx_.resize(n_ctx);
    high_used_.assign(n_ctx, 0);
    low_used_.assign(n_ctx, 0);
}

const StageInstance& Engine::stage(StageRef ref) const {
    return jobs_.at(ref.job).stage_instances.at(ref.stage);
}

StageInstance& Engine::stage_mut(StageRef ref) {
    return jobs_.at(ref.job).stage_instances.at(ref.stage);
}

const Stage& Engine::stage_def(StageRef ref) const {
    return input_.tasks.at(jobs_.at(ref.job).task_id).stages.at(ref.stage);
}

const SpeedupCurve& Engine::curve_of(StageRef ref) const {
    return *stage_curve_[jobs_[ref.job].task_id][ref.stage];
}

std::uint32_t Engine::running_count(ContextId ctx) const {
    return static_cast<std::uint32_t>(running_by_ctx_.at(ctx).size());
}

std::uint32_t Engine::slots_used(ContextId ctx, SlotClass slot) const {
    return slot == SlotClass::High ? high_used_.at(ctx) : low_used_.at(ctx);
}

Millis Engine::remaining_exec_time(StageRef ref, ContextId ctx) const {
    const double sms = input_.pool.contexts.at(ctx).sm_count;
    return stage(ref).remaining_work / curve_of(ref).gain(sms);
}

void Engine::assign(StageRef ref, ContextId ctx) {
    if (ctx >= input_.pool.contexts.size()) {
        throw InvariantViolation("assign: no context " + std::to_string(ctx));
    }
    StageInstance& inst = stage_mut(ref);
    if (inst.state != StageState::Waiting) {
        throw InvariantViolation("assign: stage is not waiting");
    }
    if (inst.assigned_context) {
        throw InvariantViolation("assign: stages never migrate once assigned");
    }
    inst.assigned_context = ctx;
    waiting_by_ctx_[ctx].push_back(ref);
    record(TraceKind::Assign, ref, static_cast<std::int32_t>(ctx));
}

void Engine::set_level(StageRef ref, PriorityLevel level) {
    StageInstance& inst = stage_mut(ref);
    const Stage& def = stage_def(ref);
    if (inst.state == StageState::Done || inst.state == StageState::Running) {
        throw InvariantViolation("set_level: stage already started");
    }
    if (def.base_priority == BasePriority::High) {
        if (level != PriorityLevel::High) {
            throw InvariantViolation("set_level: high-priority stages keep the high level");
        }
    } else if (level == PriorityLevel::High) {
        throw InvariantViolation("set_level: low-priority stages cannot become high");
    } else if (level == PriorityLevel::Medium) {
        const Job& j = jobs_[ref.job];
        const bool predecessor_missed =
            std::any_of(j.stage_instances.begin(), j.stage_instances.begin() + ref.stage,
                        [](const StageInstance& s) { return s.miss_flag; });
        if (!predecessor_missed) {
            throw InvariantViolation("set_level: medium requires a missed predecessor");
        }
    } else if (inst.priority_level == PriorityLevel::Medium) {
        throw InvariantViolation("set_level: promotion cannot be undone");
    }
    const bool promoted = level == PriorityLevel::Medium && inst.priority_level != PriorityLevel::Medium;
    inst.priority_level = level;
    if (promoted) {
        record(TraceKind::Promote, ref,
               inst.assigned_context ? static_cast<std::int32_t>(*inst.assigned_context) : -1);
    }
}

void Engine::check_start(StageRef ref, ContextId ctx, SlotClass slot) const {
    const StageInstance& inst = stage(ref);
    const Context& c = input_.pool.contexts[ctx];
    if (ref.stage > 0 && stage(StageRef{ref.job, ref.stage - 1}).state != StageState::Done) {
        throw InvariantViolation("start: predecessor stage has not completed");
    }
    if (running_count(ctx) >= c.high_slots + c.low_slots) {
        throw InvariantViolation("start: context " + std::to_string(ctx) + " has no free stream");
    }
    const std::uint32_t cap = slot == SlotClass::High ? c.high_slots : c.low_slots;
    if (slots_used(ctx, slot) >= cap) {
        throw InvariantViolation("start: no free " + std::string(to_string(slot)) + " slot in context " +
                                 std::to_string(ctx));
    }
    if (profile_.typed_slots) {
        if (inst.priority_level == PriorityLevel::High && slot != SlotClass::High) {
            throw InvariantViolation("start: high stage placed in a low slot");
        }
        if (inst.priority_level != PriorityLevel::High && slot == SlotClass::High && !profile_.slot_borrowing) {
            throw InvariantViolation("start: low/medium stage placed in a high slot");
        }
    }
    for (const StageRef& w : waiting_by_ctx_[ctx]) {
        if (w == ref) {
            continue;
        }
        const StageInstance& other = stage(w);
        if (profile_.edf_within_level && other.priority_level == inst.priority_level &&
            other.absolute_deadline < inst.absolute_deadline) {
            throw InvariantViolation("start: EDF order violated within level " +
                                     std::string(to_string(inst.priority_level)));
        }
        if (profile_.level_dominance && inst.priority_level == PriorityLevel::Low &&
            other.priority_level == PriorityLevel::Medium) {
            throw InvariantViolation("start: low stage started while a medium stage waits");
        }
    }
}

void Engine::start(StageRef ref, SlotClass slot) {
    StageInstance& inst = stage_mut(ref);
    if (inst.state != StageState::Waiting || !inst.assigned_context) {
        throw InvariantViolation("start: stage must be waiting and assigned");
    }
    const ContextId ctx = *inst.assigned_context;
    if (options_.check_invariants) {
        check_start(ref, ctx, slot);
    } else if (running_count(ctx) >= 4) {
        throw InvariantViolation("start: context full");
    }
    auto& waiting = waiting_by_ctx_[ctx];
    waiting.erase(std::find(waiting.begin(), waiting.end(), ref));
    inst.state = StageState::Running;
    running_.push_back(Running{ref, ctx, slot, 0.0, 0.0, inst.remaining_work});
    running_by_ctx_[ctx].push_back(ref);
    (slot == SlotClass::High ? high_used_ : low_used_)[ctx] += 1;
    record(TraceKind::Start, ref, static_cast<std::int32_t>(ctx), slot);
}

void Engine::push_event(Millis time, EventKind kind, TaskId task, JobIndex job, std::uint32_t stage,
                        std::uint32_t instance) {
    queue_.push(Event{time, kind, seq_++, task, job, stage, instance});
}

void Engine::record(TraceKind kind, StageRef ref, std::int32_t context, SlotClass slot) {
    const Job& j = jobs_[ref.job];
    TraceRecord rec;
    rec.time = now_;
    rec.kind = kind;
    rec.task = j.task_id;
    rec.instance = j.instance;
    rec.stage = kind == TraceKind::Release || kind == TraceKind::JobDone || kind == TraceKind::Drop
                    ? -1
                    : static_cast<std::int32_t>(ref.stage + 1);
    rec.context = context;
    rec.level = j.stage_instances[ref.stage].priority_level;
    rec.slot = slot;
    record_raw(rec);
}

void Engine::record_raw(const TraceRecord& rec) {
    std::uint64_t& h = result_.trace_hash;
    hash_bytes(h, std::bit_cast<std::uint64_t>(rec.time), 8);
    hash_bytes(h, static_cast<std::uint64_t>(rec.kind), 1);
    hash_bytes(h, rec.task, 4);
    hash_bytes(h, rec.instance, 4);
    hash_bytes(h, static_cast<std::uint32_t>(rec.stage), 4);
    hash_bytes(h, static_cast<std::uint32_t>(rec.context), 4);
    hash_bytes(h, static_cast<std::uint64_t>(rec.level), 1);
    hash_bytes(h, static_cast<std::uint64_t>(rec.slot), 1);
    if (options_.keep_trace) {
        result_.trace.push_back(rec);
    }
}

void Engine::advance_to(Millis t) {
    const double dt = t - now_;
    if (dt > 0.0) {
        for (Running& r : running_) {
            const double done = r.rate * dt;
            stage_mut(r.ref).remaining_work -= done;
            r.integrated += done;
        }
    }
    now_ = t;
}

void Engine::recompute_rates() {
    const std::size_t n_ctx = input_.pool.contexts.size();
    std::vector<std::uint32_t> counts(n_ctx);
    for (std::size_t k = 0; k < n_ctx; ++k) {
        counts[k] = static_cast<std::uint32_t>(running_by_ctx_[k].size());
    }
    const std::vector<double> alloc = effective_allocation(input_.pool, counts);
    double total = 0.0;
    for (Running& r : running_) {
        r.rate = curve_of(r.ref).gain(alloc[r.ctx]);
        total += alloc[r.ctx];
    }
    result_.max_allocated_sms = std::max(result_.max_allocated_sms, total);
    ++result_.capacity_checks;
    if (options_.check_invariants && total > input_.pool.total_sms + kCapacityTolerance) {
        throw InvariantViolation("effective SMs exceed the physical SM count");
    }
}

Millis Engine::next_completion() const {
    Millis best = std::numeric_limits<Millis>::infinity();
    for (const Running& r : running_) {
        best = std::min(best, now_ + stage(r.ref).remaining_work / r.rate);
    }
    return best;
}

void Engine::complete_stages(std::span<const StageRef> done) {
    for (const StageRef& ref : done) {
        auto it = std::find_if(running_.begin(), running_.end(), [&](const Running& r) { return r.ref == ref; });
        const Running r = *it;
        running_.erase(it);
        ++seq_;
        ++result_.events;

        const double err = std::abs(r.integrated - r.work) / r.work;
        result_.max_work_error = std::max(result_.max_work_error, err);
        if (options_.check_invariants && err > kWorkTolerance) {
            throw InvariantViolation("work conservation violated on completion");
        }

        StageInstance& inst = stage_mut(ref);
        inst.remaining_work = 0.0;
        inst.state = StageState::Done;
        auto& on_ctx = running_by_ctx_[r.ctx];
        on_ctx.erase(std::find(on_ctx.begin(), on_ctx.end(), ref));
        (r.slot == SlotClass::High ? high_used_ : low_used_)[r.ctx] -= 1;
        ++result_.stages_completed;
        record(TraceKind::Complete, ref, static_cast<std::int32_t>(r.ctx), r.slot);

        policy_->on_stage_complete(*this, ref);
        Job& job = jobs_[ref.job];
        if (ref.stage + 1 < job.stage_instances.size()) {
            const StageRef next{ref.job, ref.stage + 1};
            stage_mut(next).state = StageState::Waiting;
            policy_->on_stage_ready(*this, next);
        } else {
            finish_job(ref.job);
        }
    }
}

void Engine::finish_job(JobIndex j) {
    const TaskId t = jobs_[j].task_id;
    result_.jobs[j].completion = now_;
    record(TraceKind::JobDone, StageRef{j, 0});
    active_job_[t].reset();
    if (!backlog_[t].empty()) {
        const JobIndex next = backlog_[t].front();
        backlog_[t].pop_front();
        activate(next);
    }
}

void Engine::activate(JobIndex j) {
    active_job_[jobs_[j].task_id] = j;
    policy_->on_stage_ready(*this, StageRef{j, 0});
}

void Engine::handle_release(const Event& ev) {
    const Task& task = input_.tasks[ev.task];
    const JobIndex j = jobs_.size();
    jobs_.push_back(release_job(task, ev.instance, ev.time, j, stage_work_[ev.task]));
    const Job& job = jobs_.back();
    result_.jobs.push_back(JobOutcome{job.task_id, job.instance, job.release_time, job.absolute_deadline,
                                      std::nullopt, false, 0});
    record(TraceKind::Release, StageRef{j, 0});

    const Millis next = static_cast<double>(ev.instance + 1) * task.period;
    if (next < input_.horizon) {
        push_event(next, EventKind::JobRelease, ev.task, 0, 0, ev.instance + 1);
    }

    if (active_job_[ev.task] && options_.drop_on_overrun) {
        result_.jobs[j].dropped = true;
        record(TraceKind::Drop, StageRef{j, 0});
        return;
    }
    for (std::uint32_t s = 0; s < job.stage_instances.size(); ++s) {
        const Millis d = job.stage_instances[s].absolute_deadline;
        if (d <= input_.horizon) {
            push_event(d, EventKind::DeadlineCheck, ev.task, j, s);
        }
    }
    if (active_job_[ev.task]) {
        backlog_[ev.task].push_back(j);
    } else {
        activate(j);
    }
}

void Engine::handle_deadline(const Event& ev) {
    const StageRef ref{ev.job, ev.stage};
    StageInstance& inst = stage_mut(ref);
    const std::int32_t ctx = inst.assigned_context ? static_cast<std::int32_t>(*inst.assigned_context) : -1;
    if (inst.state == StageState::Done) {
        record(TraceKind::DeadlineMet, ref, ctx);
        return;
    }
    inst.miss_flag = true;
    ++result_.jobs[ev.job].stage_misses;
    ++result_.stage_misses;
    record(TraceKind::DeadlineMiss, ref, ctx);
    policy_->on_deadline_miss(*this, ref);
}

SimResult Engine::run(SchedulerPolicy& policy) {
    if (policy_ != nullptr) {
        throw SimulationError("an engine runs exactly once");
    }
    policy_ = &policy;
    profile_ = policy.profile();
    result_.trace_hash = kFnvOffset;
    result_.horizon = input_.horizon;
    result_.warmup = input_.warmup;
    result_.n_tasks = input_.tasks.size();
    policy.reset(*this);

    for (const Task& t : input_.tasks) {
        push_event(0.0, EventKind::JobRelease, t.id, 0, 0, 0);
    }
    push_event(input_.horizon, EventKind::SimulationEnd, 0, 0, 0);

    Millis last_instant = -1.0;
    std::uint64_t at_instant = 0;
    std::vector<StageRef> finishing;
    while (true) {
        const Millis t_done = next_completion();
        const Event top = queue_.top();
        if (t_done <= top.time) {
            finishing.clear();
            for (const Running& r : running_) {
                if (now_ + stage(r.ref).remaining_work / r.rate == t_done) {
                    finishing.push_back(r.ref);
                }
            }
            advance_to(t_done);
            complete_stages(finishing);
        } else {
            queue_.pop();
            advance_to(top.time);
            ++result_.events;
            if (top.kind == EventKind::SimulationEnd) {
                TraceRecord end;
                end.time = now_;
                end.kind = TraceKind::End;
                record_raw(end);
                break;
            }
            if (top.kind == EventKind::JobRelease) {
                handle_release(top);
            } else {
                handle_deadline(top);
            }
        }
        policy.dispatch(*this);
        recompute_rates();

        if (now_ == last_instant) {
            if (++at_instant > options_.livelock_limit) {
                throw SimulationError("livelock: no time progress after " + std::to_string(at_instant) + " events");
            }
        } else {
            last_instant = now_;
            at_instant = 0;
        }
    }
    return std::move(result_);
}

SimResult simulate(SimInput input, SchedulerPolicy& policy, EngineOptions options) {
    Engine engine(std::move(input), options);
    return engine.run(policy);
}

}  // namespace sgprs
