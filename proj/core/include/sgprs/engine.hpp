#pragma once

#include <sgprs/model.hpp>
#include <sgprs/speedup.hpp>

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace sgprs {

/// Raised when a run cannot proceed (bad input, livelock).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a scheduler or the engine breaks a runtime invariant.
class InvariantViolation : public SimulationError {
public:
    using SimulationError::SimulationError;
};

/// Declaration order is the tie-break rank at equal timestamps.
enum class EventKind : std::uint8_t { StageCompletion = 0, DeadlineCheck = 1, JobRelease = 2, SimulationEnd = 3 };

const char* to_string(EventKind kind);

struct Event {
    Millis time = 0.0;
    EventKind kind = EventKind::SimulationEnd;
    std::uint64_t seq = 0;
    TaskId task = 0;
    JobIndex job = 0;
    std::uint32_t stage = 0;     ///< 0-based
    std::uint32_t instance = 0;  ///< release index for JobRelease
};

/// Total order by (time, kind rank, seq).
bool event_before(const Event& a, const Event& b);

/// Reference to one stage instance inside a run. `stage` is 0-based.
struct StageRef {
    JobIndex job = 0;
    std::uint32_t stage = 0;

    auto operator<=>(const StageRef&) const = default;
};

enum class SlotClass : std::uint8_t { High, Low };

const char* to_string(SlotClass slot);

/// Effective SMs each running stage of context k receives: contexts with work
/// demand their full sm_count, demand is scaled down uniformly when it exceeds
/// the physical SMs, and each context splits its share evenly.
/// Returns 0 for contexts with nothing running.
std::vector<double> effective_allocation(const ContextPool& pool, std::span<const std::uint32_t> running_counts);

struct SimInput {
    std::vector<Task> tasks;  ///< prepared (offline phase applied)
    ContextPool pool;
    CurveSet curves;
    Millis horizon = 11000.0;
    Millis warmup = 1000.0;
};

struct EngineOptions {
    bool keep_trace = false;
    bool drop_on_overrun = false;
    bool check_invariants = true;
    /// Events processed at a single instant before the run is declared livelocked.
    std::uint64_t livelock_limit = 1'000'000;
};

enum class TraceKind : std::uint8_t {
    Release,
    Assign,
    Promote,
    Start,
    Complete,
    DeadlineMet,
    DeadlineMiss,
    JobDone,
    Drop,
    End,
};

const char* to_string(TraceKind kind);

struct TraceRecord {
    Millis time = 0.0;
    TraceKind kind = TraceKind::End;
    TaskId task = 0;
    std::uint32_t instance = 0;
    std::int32_t stage = -1;    ///< 1-based, -1 when not applicable
    std::int32_t context = -1;
    PriorityLevel level = PriorityLevel::Low;
    SlotClass slot = SlotClass::Low;
};

/// Writes one tab-separated line: time_ms, kind, task, instance, stage, context, detail.
void write_trace_line(std::ostream& out, const TraceRecord& rec);

struct JobOutcome {
    TaskId task = 0;
    std::uint32_t instance = 0;
    Millis release = 0.0;
    Millis deadline = 0.0;
    std::optional<Millis> completion;
    bool dropped = false;
    std::uint32_t stage_misses = 0;

    bool missed() const { return !completion || *completion > deadline; }
};

struct SimResult {
    std::vector<JobOutcome> jobs;
    std::vector<TraceRecord> trace;  ///< filled only with EngineOptions::keep_trace
    std::uint64_t trace_hash = 0;
    std::uint64_t events = 0;
    std::uint64_t stages_completed = 0;
    std::uint64_t stage_misses = 0;
    double max_work_error = 0.0;       ///< worst relative |integral of rate - work|
    double max_allocated_sms = 0.0;    ///< worst sum of effective SMs at an event instant
    std::uint64_t capacity_checks = 0;
    Millis horizon = 0.0;
    Millis warmup = 0.0;
    std::size_t n_tasks = 0;
};

/// Runtime checks a policy promises to satisfy; the engine asserts them on every start.
struct InvariantProfile {
    bool edf_within_level = false;
    bool level_dominance = false;
    bool typed_slots = false;
    bool slot_borrowing = false;
};

class Engine;

/// Scheduler callbacks. Hooks may assign contexts and set levels; stages only
/// start through `dispatch`, which is invoked after every event.
class SchedulerPolicy {
public:
    virtual ~SchedulerPolicy() = default;

    virtual std::string_view name() const = 0;
    virtual InvariantProfile profile() const { return {}; }

    virtual void reset(const Engine& engine) = 0;
    /// A stage became Waiting (job activation or predecessor completion).
    virtual void on_stage_ready(Engine& engine, StageRef ref) = 0;
    /// A running stage finished; its slot is already free.
    virtual void on_stage_complete(Engine& engine, StageRef ref) = 0;
    virtual void on_deadline_miss(Engine& engine, StageRef ref) = 0;
    virtual void dispatch(Engine& engine) = 0;
};

/// Deterministic discrete-event simulation of one scenario.
///
/// Running stages progress at rate gain(effective SMs); rates are piecewise
/// constant between events and recomputed after each one. Completions are not
/// queued: the next completion instant is derived from current rates.
class Engine {
public:
    Engine(SimInput input, EngineOptions options = {});

    SimResult run(SchedulerPolicy& policy);

    // Read access for policies.
    Millis now() const { return now_; }
    const ContextPool& pool() const { return input_.pool; }
    const Task& task(TaskId id) const { return input_.tasks.at(id); }
    std::size_t task_count() const { return input_.tasks.size(); }
    const Job& job(JobIndex j) const { return jobs_.at(j); }
    const StageInstance& stage(StageRef ref) const;
    const Stage& stage_def(StageRef ref) const;
    std::uint32_t running_count(ContextId ctx) const;
    std::uint32_t slots_used(ContextId ctx, SlotClass slot) const;
    std::span<const StageRef> running_on(ContextId ctx) const { return running_by_ctx_.at(ctx); }
    /// Time the stage still needs running alone on the context's full SM count.
    Millis remaining_exec_time(StageRef ref, ContextId ctx) const;

    // Mutations available to policies; all are validated.
    void assign(StageRef ref, ContextId ctx);
    void set_level(StageRef ref, PriorityLevel level);
    void start(StageRef ref, SlotClass slot);

private:
    struct Running {
        StageRef ref;
        ContextId ctx = 0;
        SlotClass slot = SlotClass::Low;
        double rate = 0.0;
        double integrated = 0.0;
        double work = 0.0;
    };

    struct EventAfter {
        bool operator()(const Event& a, const Event& b) const { return event_before(b, a); }
    };

    StageInstance& stage_mut(StageRef ref);
    const SpeedupCurve& curve_of(StageRef ref) const;
    void push_event(Millis time, EventKind kind, TaskId task, JobIndex job, std::uint32_t stage, std::uint32_t instance = 0);
    void advance_to(Millis t);
    void recompute_rates();
    Millis next_completion() const;
    void complete_stages(std::span<const StageRef> done);
    void handle_release(const Event& ev);
    void handle_deadline(const Event& ev);
    void activate(JobIndex j);
    void finish_job(JobIndex j);
    void check_start(StageRef ref, ContextId ctx, SlotClass slot) const;
    void record(TraceKind kind, StageRef ref, std::int32_t context = -1, SlotClass slot = SlotClass::Low);
    void record_raw(const TraceRecord& rec);

    SimInput input_;
    EngineOptions options_;
    SchedulerPolicy* policy_ = nullptr;
    InvariantProfile profile_;

    Millis now_ = 0.0;
    std::uint64_t seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::vector<Job> jobs_;
    std::vector<std::vector<double>> stage_work_;                // per task, per stage
    std::vector<std::vector<const SpeedupCurve*>> stage_curve_;  // per task, per stage
    std::vector<std::optional<JobIndex>> active_job_;            // per task
    std::vector<std::deque<JobIndex>> backlog_;                  // per task
    std::vector<Running> running_;
    std::vector<std::vector<StageRef>> running_by_ctx_;
    std::vector<std::vector<StageRef>> waiting_by_ctx_;
    std::vector<std::uint32_t> high_used_;
    std::vector<std::uint32_t> low_used_;
    SimResult result_;
};

/// Convenience wrapper: construct an engine and run it.
SimResult simulate(SimInput input, SchedulerPolicy& policy, EngineOptions options = {});

}  // namespace sgprs
