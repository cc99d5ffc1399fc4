#include <sgprs/metrics.hpp>

#include <doctest.h>

using namespace sgprs;

namespace {

JobOutcome job(double release, double deadline, std::optional<double> done) {
    JobOutcome j;
    j.release = release;
    j.deadline = deadline;
    j.completion = done;
    return j;
}

}  // namespace

TEST_CASE("total fps counts completions inside the window") {
    std::vector<JobOutcome> jobs;
    for (int k = 0; k < 300; ++k) {
        jobs.push_back(job(k * 10.0, k * 10.0 + 10, 1000.0 + k * 30.0 + 1.0));
    }
    CHECK(total_fps(jobs, 1000, 11000) == doctest::Approx(30.0));
    CHECK(total_fps({}, 1000, 11000) == 0.0);

    // boundaries: (warmup, horizon]
    const std::vector<JobOutcome> edge{job(0, 5, 1000.0), job(0, 5, 11000.0), job(0, 5, std::nullopt)};
    CHECK(total_fps(edge, 1000, 11000) == doctest::Approx(0.1));
    CHECK_THROWS_AS(total_fps(edge, 1000, 1000), ModelError);
}

TEST_CASE("dmr is job level over deadlines in the window") {
    std::vector<JobOutcome> jobs;
    for (int k = 0; k < 100; ++k) {
        const double d = 2000.0 + k;
        jobs.push_back(job(d - 30, d, k < 7 ? d + 1 : d - 1));
    }
    CHECK(dmr(jobs, 1000, 11000) == doctest::Approx(0.07));

    std::vector<JobOutcome> met{job(1500, 1530, 1520)};
    CHECK(dmr(met, 1000, 11000) == 0.0);
    std::vector<JobOutcome> unfinished{job(10900, 10950, std::nullopt)};
    CHECK(dmr(unfinished, 1000, 11000) == 1.0);
    std::vector<JobOutcome> outside{job(0, 900, std::nullopt), job(10990, 11020, std::nullopt)};
    CHECK(dmr(outside, 1000, 11000) == 0.0);
    CHECK(dmr({}, 1000, 11000) == 0.0);
}

TEST_CASE("pivot point uses prefix semantics") {
    CHECK(pivot_point(std::map<std::size_t, double>{{1, 0}, {2, 0}, {3, 0}, {4, 0.02}, {5, 0.1}}) == 3);
    CHECK(pivot_point(std::map<std::size_t, double>{{1, 0}, {2, 0}, {3, 0}}) == 3);
    CHECK(pivot_point(std::map<std::size_t, double>{{1, 0}, {2, 0.01}, {3, 0}, {4, 0}}) == 1);
    CHECK(pivot_point(std::map<std::size_t, double>{{1, 0.5}, {2, 0}}) == 0);
    CHECK(pivot_point(std::map<std::size_t, double>{{0, 0}, {1, 0}, {2, 0}}) == 2);
    CHECK_THROWS_AS(pivot_point(std::map<std::size_t, double>{{1, 0}, {3, 0}}), ModelError);
    CHECK_THROWS_AS(pivot_point(std::map<std::size_t, double>{{2, 0}, {3, 0}}), ModelError);
    CHECK_THROWS_AS(pivot_point(std::map<std::size_t, double>{}), ModelError);
}

TEST_CASE("run metrics are consistent with the job list") {
    SimResult r;
    r.warmup = 1000;
    r.horizon = 11000;
    r.n_tasks = 2;
    r.jobs = {job(0, 33, 10), job(1500, 1533, 1540), job(1500, 1533, 1520), job(10990, 11023, std::nullopt)};
    r.jobs[0].task = 0;
    r.jobs[1].task = 0;
    r.jobs[2].task = 1;
    r.jobs[3].task = 1;
    const RunMetrics m = compute_metrics(r);
    CHECK(m.jobs_released == 4);
    CHECK(m.jobs_completed == 3);
    CHECK(m.jobs_evaluated == 2);
    CHECK(m.jobs_missed == 1);
    CHECK(m.dmr == doctest::Approx(0.5));
    CHECK(m.total_fps == doctest::Approx(0.2));
    REQUIRE(m.per_task.size() == 2);
    // per-task counts cover the measurement window, like total FPS
    CHECK(m.per_task[0].completed + m.per_task[1].completed == 2);
    CHECK(m.per_task[0].fps + m.per_task[1].fps == doctest::Approx(m.total_fps));
}
