#pragma once

#include <sgprs/engine.hpp>

#include <deque>
#include <optional>
#include <vector>

namespace sgprs {

/// Fixed task -> context map.
struct StaticAssignment {
    std::vector<ContextId> context_of;  ///< indexed by task id

    ContextId at(TaskId task) const { return context_of.at(task); }
};

/// Round-robin: task i runs on context i mod n_p.
StaticAssignment assign_static(std::size_t n_tasks, const ContextPool& pool);

/// Pure spatial partitioning baseline. Each task is pinned to a context; each
/// context serves one job at a time in release order and runs its stages
/// back to back on the full context. Stage deadlines and priorities are ignored.
class NaiveScheduler final : public SchedulerPolicy {
public:
    std::string_view name() const override { return "naive"; }

    void reset(const Engine& engine) override;
    void on_stage_ready(Engine& engine, StageRef ref) override;
    void on_stage_complete(Engine& engine, StageRef ref) override;
    void on_deadline_miss(Engine&, StageRef) override {}
    void dispatch(Engine& engine) override;

    const StaticAssignment& assignment() const { return assignment_; }

private:
    struct PerContext {
        std::deque<JobIndex> fifo;
        std::optional<JobIndex> in_service;
        std::optional<StageRef> ready;  ///< next stage of the job in service
    };

    StaticAssignment assignment_;
    std::vector<PerContext> contexts_;
};

}  // namespace sgprs
