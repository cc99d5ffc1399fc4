#include <sgprs/engine.hpp>
#include <sgprs/metrics.hpp>
#include <sgprs/naive_scheduler.hpp>
#include <sgprs/sgprs_scheduler.hpp>

#include "../support.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <sstream>

using namespace sgprs;
namespace ts = testing_support;

namespace {

Task stage_chain(TaskId id, std::vector<double> wcets, double period, double deadline, const std::string& curve) {
    std::vector<std::string> curves(wcets.size(), curve);
    return prepare_task(make_task(id, wcets, curves, period, deadline));
}

SimInput input_for(std::vector<Task> tasks, ContextPool pool, double horizon_ms = 10000.0, double warmup_ms = 1000.0) {
    return SimInput{std::move(tasks), std::move(pool), default_curves(), horizon_ms, warmup_ms};
}

std::vector<Task> resnet_tasks(std::size_t n, double frame_ms = 3.8) {
    std::vector<Task> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(stage_chain(static_cast<TaskId>(i), std::vector<double>(6, frame_ms / 6), 1000.0 / 30,
                                  1000.0 / 30, "resnet18"));
    }
    return out;
}

std::size_t count_kind(const SimResult& r, TraceKind kind) {
    return static_cast<std::size_t>(
        std::count_if(r.trace.begin(), r.trace.end(), [kind](const TraceRecord& t) { return t.kind == kind; }));
}

}  // namespace

TEST_CASE("events order by time, then kind rank, then sequence") {
    const Event complete{5.0, EventKind::StageCompletion, 9};
    const Event check{5.0, EventKind::DeadlineCheck, 1};
    const Event release{5.0, EventKind::JobRelease, 0};
    const Event end{5.0, EventKind::SimulationEnd, 0};
    const Event earlier{4.0, EventKind::SimulationEnd, 100};
    CHECK(event_before(complete, check));
    CHECK(event_before(check, release));
    CHECK(event_before(release, end));
    CHECK(event_before(earlier, complete));
    CHECK(event_before(Event{1.0, EventKind::JobRelease, 1}, Event{1.0, EventKind::JobRelease, 2}));
    CHECK_FALSE(event_before(check, check));
}

TEST_CASE("effective allocation") {
    const std::uint32_t one_each[] = {1, 1};
    CHECK(effective_allocation(build_context_pool(68, 2, 1.0), one_each) == std::vector<double>{34, 34});
    CHECK(effective_allocation(build_context_pool(68, 2, 2.0), one_each) == std::vector<double>{34, 34});
    const std::uint32_t four[] = {4};
    CHECK(effective_allocation(build_context_pool(68, 1, 1.0), four) == std::vector<double>{17});
    const std::uint32_t one_idle[] = {2, 0};
    CHECK(effective_allocation(build_context_pool(68, 2, 2.0), one_idle) == std::vector<double>{34, 0});
    const std::uint32_t three[] = {1, 1, 1};
    const auto os15 = effective_allocation(build_context_pool(68, 3, 1.5), three);
    for (double s : os15) {
        CHECK(s == doctest::Approx(68.0 / 3));
    }
    const std::uint32_t wrong[] = {1};
    CHECK_THROWS_AS(effective_allocation(build_context_pool(68, 2, 1.0), wrong), ModelError);
}

TEST_CASE("single underloaded task runs at its frame rate") {
    SgprsScheduler policy;
    const SimResult r = simulate(input_for(resnet_tasks(1), build_context_pool(68, 1, 1.0)), policy);
    const RunMetrics m = compute_metrics(r);
    CHECK(m.total_fps == doctest::Approx(30.0).epsilon(1e-9));
    CHECK(m.dmr == 0.0);
    CHECK(m.jobs_released == 300);
    for (const JobOutcome& j : r.jobs) {
        REQUIRE(j.completion);
        CHECK(*j.completion - j.release == doctest::Approx(3.8).epsilon(1e-9));
    }
}

TEST_CASE("two tasks double the frame rate, zero tasks give nothing") {
    SgprsScheduler policy;
    const RunMetrics two = compute_metrics(simulate(input_for(resnet_tasks(2), build_context_pool(68, 1, 1.0)), policy));
    CHECK(two.total_fps == doctest::Approx(60.0).epsilon(1e-9));
    CHECK(two.dmr == 0.0);

    SgprsScheduler empty_policy;
    const SimResult none =
        simulate(input_for({}, build_context_pool(68, 1, 1.0)), empty_policy, EngineOptions{.keep_trace = true});
    const RunMetrics m = compute_metrics(none);
    CHECK(m.total_fps == 0.0);
    CHECK(m.dmr == 0.0);
    CHECK(none.jobs.empty());
    REQUIRE(none.trace.size() == 1);
    CHECK(none.trace[0].kind == TraceKind::End);
}

TEST_CASE("processor sharing timing matches a hand computation") {
    const double g34 = default_curves().at("resnet18").gain(34);

    SUBCASE("over-subscribed contexts split the GPU") {
        std::vector<Task> tasks{stage_chain(0, {2.0}, 100, 100, "resnet18"), stage_chain(1, {2.0}, 100, 100, "resnet18")};
        SgprsScheduler policy;
        const SimResult r = simulate(input_for(tasks, build_context_pool(68, 2, 2.0), 100, 0), policy);
        const double expected = 2.0 * 23.0 / g34;
        REQUIRE(r.jobs.size() == 2);
        CHECK(*r.jobs[0].completion == doctest::Approx(expected).epsilon(1e-9));
        CHECK(*r.jobs[1].completion == doctest::Approx(expected).epsilon(1e-9));
        CHECK(r.max_allocated_sms == doctest::Approx(68.0));
    }

    SUBCASE("rate rises when a co-runner finishes") {
        std::vector<Task> tasks{stage_chain(0, {3.0}, 100, 100, "resnet18"), stage_chain(1, {1.0}, 100, 100, "resnet18")};
        SgprsScheduler policy;
        const SimResult r = simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 100, 0), policy);
        const double short_done = 23.0 / g34;
        CHECK(*r.jobs[1].completion == doctest::Approx(short_done).epsilon(1e-9));
        CHECK(*r.jobs[0].completion == doctest::Approx(short_done + 2.0).epsilon(1e-9));
        CHECK(r.max_work_error < 1e-9);
    }
}

TEST_CASE("deadline checks") {
    SUBCASE("completion exactly at the deadline is met") {
        std::vector<Task> tasks{stage_chain(0, {4.0}, 4.0, 4.0, "conv")};
        SgprsScheduler policy;
        const SimResult r = simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 40, 0), policy,
                                     EngineOptions{.keep_trace = true});
        CHECK(r.stage_misses == 0);
        CHECK(count_kind(r, TraceKind::DeadlineMet) == 10);
        for (const JobOutcome& j : r.jobs) {
            CHECK_FALSE(j.missed());
        }
    }

    SUBCASE("a running stage at its deadline misses and promotes successors") {
        std::vector<Task> tasks{stage_chain(0, {1.0, 1.0, 1.0}, 100, 3.0, "conv")};
        SgprsScheduler policy;
        const SimResult r = simulate(input_for(tasks, build_context_pool(68, 2, 1.0), 100, 0), policy,
                                     EngineOptions{.keep_trace = true});
        REQUIRE_FALSE(r.trace.empty());
        const auto miss = std::find_if(r.trace.begin(), r.trace.end(),
                                       [](const TraceRecord& t) { return t.kind == TraceKind::DeadlineMiss; });
        REQUIRE(miss != r.trace.end());
        CHECK(miss->stage == 1);
        CHECK(miss->time == doctest::Approx(1.0));
        const auto promote = std::find_if(r.trace.begin(), r.trace.end(),
                                          [](const TraceRecord& t) { return t.kind == TraceKind::Promote; });
        REQUIRE(promote != r.trace.end());
        CHECK(promote->stage == 2);
        CHECK(r.jobs[0].missed());
    }

    SUBCASE("a waiting stage at its deadline misses") {
        // five identical single-stage tasks on one context: the fifth waits for a slot
        std::vector<Task> tasks;
        for (TaskId i = 0; i < 5; ++i) {
            tasks.push_back(stage_chain(i, {1.0}, 100, 1.5, "conv"));
        }
        SgprsScheduler policy;
        const SimResult r = simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 100, 0), policy);
        CHECK(r.stage_misses >= 1);
        CHECK(std::any_of(r.jobs.begin(), r.jobs.end(), [](const JobOutcome& j) { return j.missed(); }));
    }
}

TEST_CASE("per-task backlog serializes overrunning jobs") {
    // each job needs 5 ms on the full GPU but the task releases every 4 ms
    std::vector<Task> tasks{stage_chain(0, {5.0}, 4.0, 4.0, "conv")};
    SgprsScheduler policy;
    const SimResult r = simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 40, 0), policy);
    REQUIRE(r.jobs.size() == 10);
    for (std::size_t k = 0; k + 1 < r.jobs.size(); ++k) {
        if (r.jobs[k].completion && r.jobs[k + 1].completion) {
            CHECK(*r.jobs[k + 1].completion == doctest::Approx(*r.jobs[k].completion + 5.0));
        }
    }

    SgprsScheduler drop_policy;
    const SimResult d = simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 40, 0), drop_policy,
                                 EngineOptions{.drop_on_overrun = true});
    const auto dropped = std::count_if(d.jobs.begin(), d.jobs.end(), [](const JobOutcome& j) { return j.dropped; });
    CHECK(dropped > 0);
    for (const JobOutcome& j : d.jobs) {
        if (j.dropped) {
            CHECK_FALSE(j.completion);
        }
    }
}

TEST_CASE("engine input validation") {
    SgprsScheduler policy;
    CHECK_THROWS_AS(simulate(input_for(resnet_tasks(1), build_context_pool(68, 1, 1.0), 1000, 1000), policy),
                    SimulationError);
    std::vector<std::string> curves{"resnet18"};
    const double c[] = {1.0};
    const Task raw = make_task(0, c, curves, 10, 10);
    CHECK_THROWS_AS(simulate(input_for({raw}, build_context_pool(68, 1, 1.0)), policy), SimulationError);
    const Task unknown = prepare_task(make_task(0, c, std::vector<std::string>{"vgg"}, 10, 10));
    CHECK_THROWS_AS(simulate(input_for({unknown}, build_context_pool(68, 1, 1.0)), policy), ModelError);
}

namespace {

// Starts the latest-deadline waiting stage first while claiming EDF.
class LatestFirst final : public SchedulerPolicy {
public:
    std::string_view name() const override { return "latest_first"; }
    InvariantProfile profile() const override { return {true, true, true, false}; }
    void reset(const Engine&) override { waiting_.clear(); }
    void on_stage_ready(Engine& e, StageRef ref) override {
        e.assign(ref, 0);
        waiting_.push_back(ref);
    }
    void on_stage_complete(Engine&, StageRef) override {}
    void on_deadline_miss(Engine&, StageRef) override {}
    void dispatch(Engine& e) override {
        std::sort(waiting_.begin(), waiting_.end(), [&](StageRef a, StageRef b) {
            return e.stage(a).absolute_deadline > e.stage(b).absolute_deadline;
        });
        while (!waiting_.empty() && e.slots_used(0, SlotClass::Low) < 2) {
            e.start(waiting_.front(), SlotClass::Low);
            waiting_.erase(waiting_.begin());
        }
    }

private:
    std::vector<StageRef> waiting_;
};

// Puts every stage in a high slot.
class HighOnly final : public SchedulerPolicy {
public:
    std::string_view name() const override { return "high_only"; }
    InvariantProfile profile() const override { return {false, false, true, false}; }
    void reset(const Engine&) override {}
    void on_stage_ready(Engine& e, StageRef ref) override { e.assign(ref, 0); }
    void on_stage_complete(Engine&, StageRef) override {}
    void on_deadline_miss(Engine&, StageRef) override {}
    void dispatch(Engine& e) override {
        for (JobIndex j = 0;; ++j) {
            try {
                const StageRef ref{j, 0};
                if (e.stage(ref).state == StageState::Waiting) {
                    e.start(ref, SlotClass::High);
                }
            } catch (const std::out_of_range&) {
                return;
            }
        }
    }
};

}  // namespace

TEST_CASE("engine assertions catch policies that break dispatch rules") {
    std::vector<Task> tasks;
    for (TaskId i = 0; i < 4; ++i) {
        tasks.push_back(stage_chain(i, {1.0, 1.0}, 50, 10.0 + i, "conv"));
    }
    LatestFirst latest;
    CHECK_THROWS_AS(simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 100, 0), latest), InvariantViolation);

    HighOnly high;
    CHECK_THROWS_AS(simulate(input_for(tasks, build_context_pool(68, 1, 1.0), 100, 0), high), InvariantViolation);

    Engine engine(input_for(tasks, build_context_pool(68, 1, 1.0), 100, 0));
    SgprsScheduler ok;
    CHECK_NOTHROW(engine.run(ok));
    CHECK_THROWS_AS(engine.run(ok), SimulationError);
}

TEST_CASE("trace hash is stable and sensitive") {
    auto run = [](double frame) {
        SgprsScheduler policy;
        return simulate(input_for(resnet_tasks(5, frame), build_context_pool(68, 2, 1.5), 2000, 100), policy).trace_hash;
    };
    CHECK(run(3.8) == run(3.8));
    CHECK(run(3.8) != run(3.9));
}

TEST_CASE("trace lines are tab separated") {
    TraceRecord rec;
    rec.time = 1.5;
    rec.kind = TraceKind::Start;
    rec.task = 2;
    rec.instance = 3;
    rec.stage = 4;
    rec.context = 1;
    rec.level = PriorityLevel::Medium;
    rec.slot = SlotClass::Low;
    std::ostringstream out;
    write_trace_line(out, rec);
    CHECK(out.str() == "1.500000\tstart\t2\t3\t4\t1\tlevel=medium slot=low\n");
}

TEST_CASE("property: random SGPRS runs keep every dispatch invariant") {
    const std::vector<std::string> curves{"resnet18", "conv", "maxpool", "other"};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n_tasks = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
        const std::uint32_t n_ctx = std::uniform_int_distribution<std::uint32_t>(1, 3)(rng);
        const double os = std::array{1.0, 1.5, 2.0}[std::uniform_int_distribution<int>(0, 2)(rng)];
        const bool borrowing = (rng() & 1U) != 0;
        auto tasks = ts::random_tasks(rng, n_tasks, curves);
        const ContextPool pool = build_context_pool(68, n_ctx, os);
        SgprsScheduler policy(SgprsOptions{borrowing, QueueMetric::Count});
        const SimResult r = simulate(input_for(tasks, pool, 2000, 0), policy, EngineOptions{.keep_trace = true});
        ts::TraceChecker checker(tasks, pool, borrowing);
        const std::string err = checker.check(r.trace);
        CAPTURE(seed);
        CHECK(err == "");
        CHECK(r.max_work_error < 1e-6);
        CHECK(r.max_allocated_sms <= 68 + 1e-9);
    }
}
