#pragma once

#include <sgprs/engine.hpp>

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace sgprs {

/// How "shortest queue" is measured when choosing among contexts that meet the deadline.
enum class QueueMetric : std::uint8_t { Count, Work };

const char* to_string(QueueMetric metric);

struct SgprsOptions {
    bool slot_borrowing = false;
    QueueMetric queue_metric = QueueMetric::Count;
};

/// Inputs to the context choice for one newly released stage.
struct ContextView {
    ContextId id = 0;
    std::uint32_t waiting = 0;
    std::uint32_t running = 0;
    Millis pending_ms = 0.0;    ///< remaining exec time of waiting + running stages at this context's SMs
    Millis candidate_ms = 0.0;  ///< exec time of the new stage at this context's SMs
};

struct AssignmentEstimate {
    ContextId context_id = 0;
    std::uint32_t queue_length = 0;
    Millis pending_ms = 0.0;
    Millis est_finish = 0.0;
    bool meets_deadline = false;
};

enum class AssignmentCriterion : std::uint8_t { EmptyContext, ShortestQueue, EarliestFinish };

struct AssignmentDecision {
    ContextId context = 0;
    AssignmentCriterion criterion = AssignmentCriterion::EmptyContext;
};

/// Sequential finish-time estimate for each context: now + pending + candidate.
std::vector<AssignmentEstimate> estimate_contexts(std::span<const ContextView> views, Millis now, Millis deadline);

/// Empty contexts first; then, among contexts whose estimate meets the
/// deadline, the shortest queue; otherwise the earliest estimated finish.
/// Ties resolve to earlier finish, then lower id.
AssignmentDecision assign_context(std::span<const ContextView> views, Millis now, Millis deadline,
                                  QueueMetric metric = QueueMetric::Count);

/// Three EDF-ordered queues per context (High, Medium, Low).
class ContextQueues {
public:
    struct Entry {
        Millis deadline = 0.0;
        TaskId task = 0;
        std::uint32_t instance = 0;
        std::uint32_t stage = 0;
        StageRef ref;

        std::partial_ordering operator<=>(const Entry& o) const {
            if (auto c = deadline <=> o.deadline; c != 0) {
                return c;
            }
            if (task != o.task) {
                return task <=> o.task;
            }
            if (instance != o.instance) {
                return instance <=> o.instance;
            }
            return stage <=> o.stage;
        }
        bool operator==(const Entry& o) const { return (*this <=> o) == 0; }
    };

    /// Throws InvariantViolation if the stage is already queued.
    void enqueue(PriorityLevel level, const Entry& entry);
    /// Removes a queued stage; returns the level it was queued at.
    std::optional<PriorityLevel> erase(StageRef ref);
    std::optional<Entry> pop(PriorityLevel level);
    const Entry* head(PriorityLevel level) const;
    bool contains(StageRef ref) const { return where_.count(ref) != 0; }

    std::size_t size() const { return where_.size(); }
    std::size_t size(PriorityLevel level) const { return queue(level).size(); }
    const std::set<Entry>& queue(PriorityLevel level) const { return queues_[static_cast<int>(level)]; }

private:
    std::set<Entry> queues_[3];
    std::map<StageRef, std::pair<PriorityLevel, Entry>> where_;
};

/// The SGPRS online phase: per-stage context assignment, three-level EDF
/// queues per context, 2 high + 2 low stream slots, and medium promotion of
/// the remaining low stages of a job once one of its stages misses.
class SgprsScheduler final : public SchedulerPolicy {
public:
    explicit SgprsScheduler(SgprsOptions options = {}) : options_(options) {}

    std::string_view name() const override { return "sgprs"; }
    InvariantProfile profile() const override;

    void reset(const Engine& engine) override;
    void on_stage_ready(Engine& engine, StageRef ref) override;
    void on_stage_complete(Engine& engine, StageRef ref) override;
    void on_deadline_miss(Engine& engine, StageRef ref) override;
    void dispatch(Engine& engine) override;

    /// Raises later low stages of the job to Medium, re-queueing any already queued.
    void promote(Engine& engine, StageRef missed);

    const ContextQueues& queues(ContextId ctx) const { return queues_.at(ctx); }
    /// Context views as seen by a stage about to be assigned.
    std::vector<ContextView> views_for(const Engine& engine, StageRef ref) const;

private:
    static ContextQueues::Entry entry_for(const Engine& engine, StageRef ref);
    void enqueue(Engine& engine, StageRef ref, ContextId ctx);

    SgprsOptions options_;
    std::vector<ContextQueues> queues_;
};

}  // namespace sgprs
