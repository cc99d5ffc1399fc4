#include <sgprs/naive_scheduler.hpp>

#include <algorithm>

namespace sgprs {

StaticAssignment assign_static(std::size_t n_tasks, const ContextPool& pool) {
    if (pool.contexts.empty()) {
        throw ModelError("assign_static: empty context pool");
    }
    StaticAssignment a;
    a.context_of.reserve(n_tasks);
    for (std::size_t i = 0; i < n_tasks; ++i) {
        a.context_of.push_back(static_cast<ContextId>(i % pool.contexts.size()));
    }
    return a;
}

void NaiveScheduler::reset(const Engine& engine) {
    assignment_ = assign_static(engine.task_count(), engine.pool());
    contexts_.assign(engine.pool().size(), PerContext{});
}

void NaiveScheduler::on_stage_ready(Engine& engine, StageRef ref) {
    const Job& job = engine.job(ref.job);
    const ContextId ctx = assignment_.at(job.task_id);
    engine.assign(ref, ctx);
    PerContext& pc = contexts_[ctx];
    if (ref.stage > 0) {
        pc.ready = ref;
        return;
    }
    // FIFO by release time, ties by task id.
    auto key = [&engine](JobIndex j) {
        const Job& jb = engine.job(j);
        return std::make_pair(jb.release_time, jb.task_id);
    };
    auto pos = std::upper_bound(pc.fifo.begin(), pc.fifo.end(), ref.job,
                                [&](JobIndex a, JobIndex b) { return key(a) < key(b); });
    pc.fifo.insert(pos, ref.job);
}

void NaiveScheduler::on_stage_complete(Engine& engine, StageRef ref) {
    const Job& job = engine.job(ref.job);
    PerContext& pc = contexts_[assignment_.at(job.task_id)];
    if (ref.stage + 1 == job.stage_instances.size()) {
        pc.in_service.reset();
    }
}

void NaiveScheduler::dispatch(Engine& engine) {
    for (ContextId k = 0; k < contexts_.size(); ++k) {
        PerContext& pc = contexts_[k];
        if (!pc.in_service && !pc.fifo.empty()) {
            pc.in_service = pc.fifo.front();
            pc.fifo.pop_front();
            pc.ready = StageRef{*pc.in_service, 0};
        }
        if (pc.ready && engine.running_count(k) == 0) {
            engine.start(*pc.ready, SlotClass::Low);
            pc.ready.reset();
        }
    }
}

}  // namespace sgprs
