#include <sgprs/sgprs_scheduler.hpp>

#include <string>

namespace sgprs {

const char* to_string(QueueMetric metric) {
    return metric == QueueMetric::Count ? "count" : "work";
}

std::vector<AssignmentEstimate> estimate_contexts(std::span<const ContextView> views, Millis now, Millis deadline) {
    std::vector<AssignmentEstimate> out;
    out.reserve(views.size());
    for (const ContextView& v : views) {
        AssignmentEstimate e;
        e.context_id = v.id;
        e.queue_length = v.waiting + v.running;
        e.pending_ms = v.pending_ms;
        e.est_finish = now + v.pending_ms + v.candidate_ms;
        e.meets_deadline = e.est_finish <= deadline;
        out.push_back(e);
    }
    return out;
}

AssignmentDecision assign_context(std::span<const ContextView> views, Millis now, Millis deadline,
                                  QueueMetric metric) {
    if (views.empty()) {
        throw ModelError("assign_context: empty context pool");
    }
    const std::vector<AssignmentEstimate> est = estimate_contexts(views, now, deadline);

    const AssignmentEstimate* empty = nullptr;
    for (const AssignmentEstimate& e : est) {
        if (e.queue_length == 0 && (empty == nullptr || e.context_id < empty->context_id)) {
            empty = &e;
        }
    }
    if (empty != nullptr) {
        return {empty->context_id, AssignmentCriterion::EmptyContext};
    }

    auto shorter = [metric](const AssignmentEstimate& a, const AssignmentEstimate& b) {
        if (metric == QueueMetric::Count) {
            if (a.queue_length != b.queue_length) {
                return a.queue_length < b.queue_length;
            }
        } else if (a.pending_ms != b.pending_ms) {
            return a.pending_ms < b.pending_ms;
        }
        if (a.est_finish != b.est_finish) {
            return a.est_finish < b.est_finish;
        }
        return a.context_id < b.context_id;
    };
    const AssignmentEstimate* best = nullptr;
    for (const AssignmentEstimate& e : est) {
        if (e.meets_deadline && (best == nullptr || shorter(e, *best))) {
            best = &e;
        }
    }
    if (best != nullptr) {
        return {best->context_id, AssignmentCriterion::ShortestQueue};
    }

    for (const AssignmentEstimate& e : est) {
        if (best == nullptr || e.est_finish < best->est_finish ||
            (e.est_finish == best->est_finish && e.context_id < best->context_id)) {
            best = &e;
        }
    }
    return {best->context_id, AssignmentCriterion::EarliestFinish};
}

void ContextQueues::enqueue(PriorityLevel level, const Entry& entry) {
    if (where_.count(entry.ref) != 0) {
        throw InvariantViolation("enqueue: stage is already queued");
    }
    queues_[static_cast<int>(level)].insert(entry);
    where_.emplace(entry.ref, std::make_pair(level, entry));
}

std::optional<PriorityLevel> ContextQueues::erase(StageRef ref) {
    auto it = where_.find(ref);
    if (it == where_.end()) {
        return std::nullopt;
    }
    const auto [level, entry] = it->second;
    queues_[static_cast<int>(level)].erase(entry);
    where_.erase(it);
    return level;
}

std::optional<ContextQueues::Entry> ContextQueues::pop(PriorityLevel level) {
    auto& q = queues_[static_cast<int>(level)];
    if (q.empty()) {
        return std::nullopt;
    }
    Entry e = *q.begin();
    q.erase(q.begin());
    where_.erase(e.ref);
    return e;
}

const ContextQueues::Entry* ContextQueues::head(PriorityLevel level) const {
    const auto& q = queues_[static_cast<int>(level)];
    return q.empty() ? nullptr : &*q.begin();
}

InvariantProfile SgprsScheduler::profile() const {
    return InvariantProfile{true, true, true, options_.slot_borrowing};
}

void SgprsScheduler::reset(const Engine& engine) {
    queues_.assign(engine.pool().size(), ContextQueues{});
}

ContextQueues::Entry SgprsScheduler::entry_for(const Engine& engine, StageRef ref) {
    const Job& job = engine.job(ref.job);
    return ContextQueues::Entry{engine.stage(ref).absolute_deadline, job.task_id, job.instance, ref.stage, ref};
}

std::vector<ContextView> SgprsScheduler::views_for(const Engine& engine, StageRef ref) const {
    std::vector<ContextView> views;
    views.reserve(queues_.size());
    for (ContextId k = 0; k < queues_.size(); ++k) {
        ContextView v;
        v.id = k;
        v.waiting = static_cast<std::uint32_t>(queues_[k].size());
        v.running = engine.running_count(k);
        for (const StageRef& r : engine.running_on(k)) {
            v.pending_ms += engine.remaining_exec_time(r, k);
        }
        for (PriorityLevel level : {PriorityLevel::High, PriorityLevel::Medium, PriorityLevel::Low}) {
            for (const ContextQueues::Entry& e : queues_[k].queue(level)) {
                v.pending_ms += engine.remaining_exec_time(e.ref, k);
            }
        }
        v.candidate_ms = engine.remaining_exec_time(ref, k);
        views.push_back(v);
    }
    return views;
}

void SgprsScheduler::enqueue(Engine& engine, StageRef ref, ContextId ctx) {
    queues_[ctx].enqueue(engine.stage(ref).priority_level, entry_for(engine, ref));
}

void SgprsScheduler::on_stage_ready(Engine& engine, StageRef ref) {
    const std::vector<ContextView> views = views_for(engine, ref);
    const AssignmentDecision d =
        assign_context(views, engine.now(), engine.stage(ref).absolute_deadline, options_.queue_metric);
    engine.assign(ref, d.context);
    enqueue(engine, ref, d.context);
}

void SgprsScheduler::on_stage_complete(Engine&, StageRef) {
    // Slot bookkeeping lives in the engine; the successor arrives via on_stage_ready.
}

void SgprsScheduler::on_deadline_miss(Engine& engine, StageRef ref) {
    promote(engine, ref);
}

void SgprsScheduler::promote(Engine& engine, StageRef missed) {
    const Job& job = engine.job(missed.job);
    for (std::uint32_t k = missed.stage + 1; k < job.stage_instances.size(); ++k) {
        const StageRef ref{missed.job, k};
        const StageInstance& inst = engine.stage(ref);
        if (inst.state == StageState::Done || inst.state == StageState::Running) {
            continue;
        }
        if (engine.stage_def(ref).base_priority != BasePriority::Low ||
            inst.priority_level != PriorityLevel::Low) {
            continue;
        }
        engine.set_level(ref, PriorityLevel::Medium);
        if (inst.assigned_context && queues_[*inst.assigned_context].erase(ref)) {
            enqueue(engine, ref, *inst.assigned_context);
        }
    }
}

void SgprsScheduler::dispatch(Engine& engine) {
    for (ContextId k = 0; k < queues_.size(); ++k) {
        const Context& ctx = engine.pool().contexts[k];
        ContextQueues& q = queues_[k];
        while (engine.slots_used(k, SlotClass::High) < ctx.high_slots && q.size(PriorityLevel::High) > 0) {
            engine.start(q.pop(PriorityLevel::High)->ref, SlotClass::High);
        }
        auto next_low = [&q]() -> std::optional<ContextQueues::Entry> {
            if (auto e = q.pop(PriorityLevel::Medium)) {
                return e;
            }
            return q.pop(PriorityLevel::Low);
        };
        while (engine.slots_used(k, SlotClass::Low) < ctx.low_slots) {
            auto e = next_low();
            if (!e) {
                break;
            }
            engine.start(e->ref, SlotClass::Low);
        }
        if (options_.slot_borrowing) {
            while (engine.slots_used(k, SlotClass::High) < ctx.high_slots) {
                auto e = next_low();
                if (!e) {
                    break;
                }
                engine.start(e->ref, SlotClass::High);
            }
        }
    }
}

}  // namespace sgprs
