#include <sgprs/engine.hpp>
#include <sgprs/naive_scheduler.hpp>
#include <sgprs/sgprs_scheduler.hpp>

#include <doctest.h>

#include <map>

using namespace sgprs;

namespace {

Task stage_chain(TaskId id, std::vector<double> wcets, double period, double deadline) {
    std::vector<std::string> curves(wcets.size(), "conv");
    return prepare_task(make_task(id, wcets, curves, period, deadline));
}

}  // namespace

TEST_CASE("static assignment is round-robin") {
    CHECK(assign_static(4, build_context_pool(68, 2, 1.0)).context_of == std::vector<ContextId>{0, 1, 0, 1});
    CHECK(assign_static(1, build_context_pool(68, 3, 1.0)).context_of == std::vector<ContextId>{0});
    CHECK(assign_static(3, build_context_pool(68, 3, 1.0)).context_of == std::vector<ContextId>{0, 1, 2});
    CHECK(assign_static(0, build_context_pool(68, 3, 1.0)).context_of.empty());
}

TEST_CASE("jobs on a context run one at a time in release order") {
    // tasks 0 and 1 share context 0; each job takes 2 ms on the full context
    std::vector<Task> tasks{stage_chain(0, {1.0, 1.0}, 10, 10), stage_chain(1, {1.0, 1.0}, 10, 10)};
    NaiveScheduler policy;
    const SimResult r = simulate(SimInput{tasks, build_context_pool(68, 1, 1.0), default_curves(), 10, 0}, policy,
                                 EngineOptions{.keep_trace = true});
    REQUIRE(r.jobs.size() == 2);
    CHECK(*r.jobs[0].completion == doctest::Approx(2.0));
    CHECK(*r.jobs[1].completion == doctest::Approx(4.0));
    int running = 0;
    for (const auto& t : r.trace) {
        if (t.kind == TraceKind::Start) {
            CHECK(++running == 1);
        } else if (t.kind == TraceKind::Complete) {
            --running;
        }
    }
}

TEST_CASE("an idle context stays idle") {
    std::vector<Task> tasks{stage_chain(0, {1.0}, 10, 10)};
    NaiveScheduler policy;
    const SimResult r = simulate(SimInput{tasks, build_context_pool(68, 3, 1.0), default_curves(), 10, 0}, policy,
                                 EngineOptions{.keep_trace = true});
    for (const auto& t : r.trace) {
        if (t.kind == TraceKind::Start) {
            CHECK(t.context == 0);
        }
    }
}

TEST_CASE("a late job still finishes and delays the next one") {
    // 3 tasks on one context, 4 ms each, 10 ms period and deadline: job 3 ends at 12
    std::vector<Task> tasks;
    for (TaskId i = 0; i < 3; ++i) {
        tasks.push_back(stage_chain(i, {2.0, 2.0}, 10, 10));
    }
    NaiveScheduler policy;
    const SimResult r = simulate(SimInput{tasks, build_context_pool(68, 1, 1.0), default_curves(), 30, 0}, policy);
    std::map<std::pair<TaskId, std::uint32_t>, double> done;
    for (const auto& j : r.jobs) {
        if (j.completion) {
            done[{j.task, j.instance}] = *j.completion;
        }
    }
    CHECK(done.at({2, 0}) == doctest::Approx(12.0));
    CHECK(r.jobs[2].missed());
    // next period's first job waits behind the late one
    CHECK(done.at({0, 1}) == doctest::Approx(16.0));
}

TEST_CASE("single task on one full context matches SGPRS exactly") {
    std::vector<Task> tasks{stage_chain(0, {0.7, 1.3, 0.4, 0.9}, 8, 8)};
    const SimInput in{tasks, build_context_pool(68, 1, 1.0), default_curves(), 200, 0};
    NaiveScheduler naive;
    SgprsScheduler sgprs;
    const SimResult a = simulate(in, naive);
    const SimResult b = simulate(in, sgprs);
    REQUIRE(a.jobs.size() == b.jobs.size());
    for (std::size_t k = 0; k < a.jobs.size(); ++k) {
        CHECK(a.jobs[k].completion == b.jobs[k].completion);
    }
}
