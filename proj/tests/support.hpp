#pragma once

// Test-only oracles and generators. Nothing here calls into the code under
// test except to read inputs, so results can be compared against it.

#include <sgprs/engine.hpp>
#include <sgprs/model.hpp>
#include <sgprs/sgprs_scheduler.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace testing_support {

inline double amdahl_p(double g, double n) {
    return (1.0 - 1.0 / g) / (1.0 - 1.0 / n);
}

inline double amdahl_gain(double g, double n, double s) {
    const double p = amdahl_p(g, n);
    return 1.0 / ((1.0 - p) + p / s);
}

inline double lerp_gain(double s0, double g0, double s1, double g1, double s) {
    return g0 + (s - s0) / (s1 - s0) * (g1 - g0);
}

/// Exhaustive evaluation of the three context-choice criteria.
inline sgprs::ContextId brute_force_context(const std::vector<sgprs::ContextView>& views, double now,
                                            double deadline, sgprs::QueueMetric metric) {
    struct Cand {
        sgprs::ContextId id;
        std::uint32_t queue;
        double pending;
        double finish;
    };
    std::vector<Cand> all;
    for (const auto& v : views) {
        all.push_back({v.id, v.waiting + v.running, v.pending_ms, now + v.pending_ms + v.candidate_ms});
    }
    // 1: empty contexts, lowest id
    std::vector<sgprs::ContextId> empty;
    for (const auto& c : all) {
        if (c.queue == 0) {
            empty.push_back(c.id);
        }
    }
    if (!empty.empty()) {
        return *std::min_element(empty.begin(), empty.end());
    }
    // 2: deadline-meeting contexts; every candidate must be no worse than all others
    std::vector<Cand> meet;
    for (const auto& c : all) {
        if (c.finish <= deadline) {
            meet.push_back(c);
        }
    }
    auto key = [metric](const Cand& c) {
        const double q = metric == sgprs::QueueMetric::Count ? static_cast<double>(c.queue) : c.pending;
        return std::make_tuple(q, c.finish, c.id);
    };
    const std::vector<Cand>& pool = meet.empty() ? all : meet;
    for (const auto& c : pool) {
        bool best = true;
        for (const auto& o : pool) {
            const bool better = meet.empty() ? std::make_tuple(o.finish, o.id) < std::make_tuple(c.finish, c.id)
                                             : key(o) < key(c);
            if (better) {
                best = false;
                break;
            }
        }
        if (best) {
            return c.id;
        }
    }
    return pool.front().id;
}

/// Replays a trace and checks dispatch invariants without looking at engine state.
/// Returns an empty string if the trace is clean, else the first violation.
class TraceChecker {
public:
    TraceChecker(const std::vector<sgprs::Task>& tasks, const sgprs::ContextPool& pool, bool borrowing)
        : tasks_(tasks), pool_(pool), borrowing_(borrowing), ctx_(pool.contexts.size()) {}

    std::string check(const std::vector<sgprs::TraceRecord>& trace) {
        for (const auto& r : trace) {
            if (r.time != time_) {
                if (auto e = check_idle(); !e.empty()) {
                    return e;
                }
                time_ = r.time;
            }
            if (auto e = apply(r); !e.empty()) {
                return e;
            }
        }
        return check_idle();
    }

    std::uint64_t starts() const { return starts_; }

private:
    using Key = std::tuple<sgprs::TaskId, std::uint32_t, std::int32_t>;  // task, instance, stage (1-based)

    struct Waiting {
        sgprs::PriorityLevel level;
        double deadline;
    };
    struct Ctx {
        std::map<Key, Waiting> waiting;
        int high = 0;
        int low = 0;
    };

    double deadline_of(const Key& k) const {
        const auto& t = tasks_.at(std::get<0>(k));
        const double release = std::get<1>(k) * t.period;
        const auto stage = static_cast<std::size_t>(std::get<2>(k));
        if (stage == t.stages.size()) {
            return release + t.relative_deadline;
        }
        double d = release;
        for (std::size_t j = 0; j < stage; ++j) {
            d += *t.stages[j].virtual_deadline;
        }
        return d;
    }

    bool predecessor_missed(const Key& k) const {
        for (std::int32_t j = 1; j < std::get<2>(k); ++j) {
            if (missed_.count(Key{std::get<0>(k), std::get<1>(k), j}) != 0) {
                return true;
            }
        }
        return false;
    }

    std::string fail(const sgprs::TraceRecord& r, const std::string& what) const {
        return "t=" + std::to_string(r.time) + " task " + std::to_string(r.task) + " inst " +
               std::to_string(r.instance) + " stage " + std::to_string(r.stage) + ": " + what;
    }

    std::string apply(const sgprs::TraceRecord& r) {
        const Key k{r.task, r.instance, r.stage};
        switch (r.kind) {
        case sgprs::TraceKind::Assign: {
            if (r.stage > 1 && done_.count(Key{r.task, r.instance, r.stage - 1}) == 0) {
                return fail(r, "stage ready before its predecessor completed");
            }
            const bool last = static_cast<std::size_t>(r.stage) == tasks_.at(r.task).stages.size();
            const auto expect = last ? sgprs::PriorityLevel::High
                                     : (predecessor_missed(k) ? sgprs::PriorityLevel::Medium : sgprs::PriorityLevel::Low);
            if (r.level != expect) {
                return fail(r, "level at assignment disagrees with the promotion rule");
            }
            ctx_.at(r.context).waiting[k] = Waiting{r.level, deadline_of(k)};
            where_[k] = r.context;
            return {};
        }
        case sgprs::TraceKind::Promote: {
            if (!predecessor_missed(k)) {
                return fail(r, "promotion without a missed predecessor");
            }
            if (r.context >= 0) {
                auto& w = ctx_.at(r.context).waiting;
                if (auto it = w.find(k); it != w.end()) {
                    it->second.level = sgprs::PriorityLevel::Medium;
                }
            }
            return {};
        }
        case sgprs::TraceKind::DeadlineMiss:
            missed_.insert(k);
            return {};
        case sgprs::TraceKind::Start: {
            ++starts_;
            if (r.stage > 1 && done_.count(Key{r.task, r.instance, r.stage - 1}) == 0) {
                return fail(r, "precedence violated");
            }
            if (where_.count(k) == 0 || where_[k] != r.context) {
                return fail(r, "started on a context it was not assigned to");
            }
            Ctx& c = ctx_.at(r.context);
            const auto it = c.waiting.find(k);
            if (it == c.waiting.end()) {
                return fail(r, "started without waiting");
            }
            const Waiting me = it->second;
            if (me.level != r.level) {
                return fail(r, "level mismatch at start");
            }
            for (const auto& [ok, ow] : c.waiting) {
                if (ok == k) {
                    continue;
                }
                if (ow.level == me.level && ow.deadline < me.deadline) {
                    return fail(r, "EDF within level violated");
                }
                if (me.level == sgprs::PriorityLevel::Low && ow.level == sgprs::PriorityLevel::Medium) {
                    return fail(r, "low stage started while a medium stage waits");
                }
            }
            if (me.level == sgprs::PriorityLevel::High && r.slot != sgprs::SlotClass::High) {
                return fail(r, "high stage in a low slot");
            }
            if (me.level != sgprs::PriorityLevel::High && r.slot == sgprs::SlotClass::High && !borrowing_) {
                return fail(r, "low/medium stage in a high slot");
            }
            (r.slot == sgprs::SlotClass::High ? c.high : c.low) += 1;
            const auto& cc = pool_.contexts.at(r.context);
            if (c.high > static_cast<int>(cc.high_slots) || c.low > static_cast<int>(cc.low_slots)) {
                return fail(r, "slot class cap exceeded");
            }
            if (c.high + c.low > 4) {
                return fail(r, "more than four running stages");
            }
            c.waiting.erase(it);
            slot_of_[k] = r.slot;
            return {};
        }
        case sgprs::TraceKind::Complete: {
            Ctx& c = ctx_.at(r.context);
            (slot_of_.at(k) == sgprs::SlotClass::High ? c.high : c.low) -= 1;
            done_.insert(k);
            return {};
        }
        default:
            return {};
        }
    }

    // After all records of an instant: no free compatible slot may coexist with a waiting stage.
    std::string check_idle() const {
        for (std::size_t i = 0; i < ctx_.size(); ++i) {
            const Ctx& c = ctx_[i];
            const auto& cc = pool_.contexts[i];
            bool high_waiting = false;
            bool low_waiting = false;
            for (const auto& [k, w] : c.waiting) {
                (w.level == sgprs::PriorityLevel::High ? high_waiting : low_waiting) = true;
            }
            const bool high_free = c.high < static_cast<int>(cc.high_slots);
            const bool low_free = c.low < static_cast<int>(cc.low_slots);
            if ((high_free && high_waiting) || (low_free && low_waiting) ||
                (borrowing_ && high_free && low_waiting)) {
                return "t=" + std::to_string(time_) + " context " + std::to_string(i) +
                       ": free slot left idle with a compatible stage waiting";
            }
        }
        return {};
    }

    const std::vector<sgprs::Task>& tasks_;
    const sgprs::ContextPool& pool_;
    bool borrowing_;
    std::vector<Ctx> ctx_;
    std::map<Key, std::int32_t> where_;
    std::map<Key, sgprs::SlotClass> slot_of_;
    std::set<Key> done_;
    std::set<Key> missed_;
    double time_ = 0.0;
    std::uint64_t starts_ = 0;
};

/// Random prepared task set: up to `max_tasks` tasks with 1..6 stages on the given curves.
inline std::vector<sgprs::Task> random_tasks(std::mt19937_64& rng, std::size_t n_tasks,
                                             const std::vector<std::string>& curve_ids) {
    std::uniform_int_distribution<int> stages(1, 6);
    std::uniform_real_distribution<double> wcet(0.1, 3.0);
    std::uniform_real_distribution<double> period(8.0, 50.0);
    std::uniform_real_distribution<double> slack(0.5, 1.5);
    std::uniform_int_distribution<std::size_t> curve(0, curve_ids.size() - 1);
    std::vector<sgprs::Task> tasks;
    for (std::size_t i = 0; i < n_tasks; ++i) {
        const int n = stages(rng);
        std::vector<double> c;
        std::vector<std::string> ids;
        for (int j = 0; j < n; ++j) {
            c.push_back(wcet(rng));
            ids.push_back(curve_ids[curve(rng)]);
        }
        const double p = period(rng);
        tasks.push_back(sgprs::prepare_task(
            sgprs::make_task(static_cast<sgprs::TaskId>(i), c, ids, p, p * slack(rng))));
    }
    return tasks;
}

}  // namespace testing_support
