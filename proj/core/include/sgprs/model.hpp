#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgprs {

/// All simulated time is expressed in milliseconds.
using Millis = double;
using TaskId = std::uint32_t;
using ContextId = std::uint32_t;

/// Raised when a task, pool or job violates a structural precondition.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class BasePriority : std::uint8_t { Low, High };

/// Runtime priority level of a stage instance. Declaration order is dispatch rank.
enum class PriorityLevel : std::uint8_t { High, Medium, Low };

enum class StageState : std::uint8_t { NotReleased, Waiting, Running, Done };

const char* to_string(BasePriority p);
const char* to_string(PriorityLevel p);
const char* to_string(StageState s);

/// One sub-task of a DNN. `index` is 1-based and gives the position in the chain.
struct Stage {
    TaskId task_id = 0;
    std::uint32_t index = 1;
    Millis wcet_ref = 0.0;          ///< WCET when running alone on `reference_sms` SMs
    double reference_sms = 68.0;
    std::string curve_id;
    BasePriority base_priority = BasePriority::Low;
    std::optional<Millis> virtual_deadline;

    bool operator==(const Stage&) const = default;
};

/// A periodic DNN task whose stages form a linear chain.
struct Task {
    TaskId id = 0;
    std::vector<Stage> stages;
    Millis period = 0.0;
    Millis relative_deadline = 0.0;
    Millis wcet_ref = 0.0;          ///< sum of stage WCETs

    bool operator==(const Task&) const = default;
};

/// Builds a validated task from per-stage WCETs and curve ids. Stage indices
/// are assigned in chain order; the task WCET is the sum of the stage WCETs.
/// The offline phase is not run; see `prepare_task`.
Task make_task(TaskId id,
               std::span<const Millis> stage_wcets,
               std::span<const std::string> stage_curves,
               Millis period,
               Millis relative_deadline,
               double reference_sms = 68.0);

/// Checks the structural invariants of a task (non-empty chain, positive
/// times, 1-based contiguous stage indices, C_i equal to the stage sum).
void validate_task(const Task& task);

/// Last stage High, every other stage Low. Depends on chain position only.
Task assign_priorities(Task task);

/// Splits the task deadline across stages proportionally to stage WCET.
Task compute_virtual_deadlines(Task task);

/// The full offline phase: priorities followed by virtual deadlines.
Task prepare_task(Task task);

struct Context {
    ContextId id = 0;
    std::uint32_t sm_count = 0;
    std::uint32_t high_slots = 2;
    std::uint32_t low_slots = 2;

    bool operator==(const Context&) const = default;
};

struct ContextPool {
    std::vector<Context> contexts;
    std::uint32_t total_sms = 0;
    double over_subscription = 1.0;

    std::size_t size() const { return contexts.size(); }
    std::uint64_t configured_sms() const;

    bool operator==(const ContextPool&) const = default;
};

/// n_p contexts of floor(total_sms * os / n_p) SMs each.
ContextPool build_context_pool(std::uint32_t total_sms, std::uint32_t n_contexts, double over_subscription);

using JobIndex = std::size_t;

struct StageInstance {
    JobIndex job_ref = 0;
    std::uint32_t stage_index = 1;  ///< 1-based, mirrors Stage::index
    Millis absolute_deadline = 0.0;
    double remaining_work = 0.0;
    PriorityLevel priority_level = PriorityLevel::Low;
    StageState state = StageState::NotReleased;
    std::optional<ContextId> assigned_context;
    bool miss_flag = false;
};

struct Job {
    TaskId task_id = 0;
    std::uint32_t instance = 0;
    Millis release_time = 0.0;
    Millis absolute_deadline = 0.0;
    std::vector<StageInstance> stage_instances;
};

/// Creates the k-th release of a prepared task. Stage deadlines are cumulative
/// offsets of the virtual deadlines from the release time, with the last stage
/// pinned to the job deadline. If `stage_work` is non-empty it seeds each
/// stage's remaining work.
Job release_job(const Task& task,
                std::uint32_t instance,
                Millis release_time,
                JobIndex job_ref = 0,
                std::span<const double> stage_work = {});

}  // namespace sgprs
