#pragma once

#include <sgprs/engine.hpp>
#include <sgprs/sgprs_scheduler.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sgprs {

enum class SchedulerKind : std::uint8_t { Naive, Sgprs };

const char* to_string(SchedulerKind kind);

struct PoolSpec {
    std::uint32_t total_sms = 68;
    std::uint32_t contexts = 2;
    double over_subscription = 1.0;

    bool operator==(const PoolSpec&) const = default;
};

/// Shape shared by every task of a scenario (tasks are identical).
struct TaskTemplate {
    std::uint32_t stage_count = 6;
    std::vector<double> stage_weights;     ///< relative stage WCETs; empty = equal split
    std::vector<std::string> stage_curves{"resnet18"};  ///< one id for all stages, or one per stage
    double frame_wcet_ms = 3.8;            ///< whole-frame WCET at reference_sms
    double reference_sms = 68.0;
    double fps = 30.0;
    std::optional<double> deadline_ms;     ///< defaults to the period
    double stage_overhead_ms = 0.0;        ///< added to every stage WCET

    double period_ms() const { return 1000.0 / fps; }
    bool operator==(const TaskTemplate&) const = default;
};

struct ScenarioFlags {
    bool slot_borrowing = false;
    QueueMetric queue_metric = QueueMetric::Count;
    bool drop_on_overrun = false;

    bool operator==(const ScenarioFlags&) const = default;
};

/// One fully expanded simulation run.
struct Scenario {
    std::string id = "scenario";
    PoolSpec pool;
    TaskTemplate task;
    std::uint32_t n_tasks = 1;
    SchedulerKind scheduler = SchedulerKind::Sgprs;
    double horizon_s = 11.0;
    double warmup_s = 1.0;
    ScenarioFlags flags;
    std::uint64_t seed = 1;
    CurveSet curves = default_curves();

    bool operator==(const Scenario&) const = default;
};

/// "naive" or "sgprs_<os>" (e.g. sgprs_1.5).
std::string variant_label(const Scenario& s);

/// Checks ranges and curve references; throws ModelError.
void validate_scenario(const Scenario& s);

/// Prepared tasks for the template (ids 0..n_tasks-1).
std::vector<Task> build_tasks(const Scenario& s);

SimInput build_input(const Scenario& s);
std::unique_ptr<SchedulerPolicy> make_policy(const Scenario& s);
EngineOptions engine_options(const Scenario& s, bool keep_trace = false);

SimResult run_scenario(const Scenario& s, bool keep_trace = false);

}  // namespace sgprs
