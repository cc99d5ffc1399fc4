#include <sgprs/sweep.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace sgprs {

namespace {

RunRecord execute(const Scenario& s, bool keep_trace) {
    RunRecord rec;
    rec.scenario = s;
    rec.label = variant_label(s);
    try {
        SimResult r = run_scenario(s, keep_trace);
        rec.metrics = compute_metrics(r);
        rec.trace_hash = r.trace_hash;
        rec.max_work_error = r.max_work_error;
        rec.max_allocated_sms = r.max_allocated_sms;
        rec.trace = std::move(r.trace);
    } catch (const std::exception& e) {
        rec.error = e.what();
    }
    return rec;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

template <typename Fn>
void for_each_series(const std::vector<CsvRow>& rows, Fn&& fn) {
    std::vector<SeriesKey> order;
    std::map<SeriesKey, std::vector<const CsvRow*>> groups;
    for (const CsvRow& r : rows) {
        SeriesKey key{r.scenario_id, r.scheduler};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) {
            order.push_back(key);
        }
        it->second.push_back(&r);
    }
    for (const SeriesKey& key : order) {
        auto& g = groups[key];
        std::stable_sort(g.begin(), g.end(), [](const CsvRow* a, const CsvRow* b) { return a->n_tasks < b->n_tasks; });
        fn(key, g);
    }
}

}  // namespace

std::vector<RunRecord> run_sweep(const std::vector<Scenario>& scenarios, const SweepOptions& options) {
    std::vector<RunRecord> out(scenarios.size());
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(scenarios.size())));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            out[i] = execute(scenarios[i], options.keep_trace);
        }
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < scenarios.size(); i = next++) {
                out[i] = execute(scenarios[i], options.keep_trace);
            }
        });
    }
    for (std::thread& t : workers) {
        t.join();
    }
    return out;
}

std::map<SeriesKey, std::size_t> sweep_pivots(const std::vector<RunRecord>& records) {
    std::map<SeriesKey, std::map<std::size_t, double>> series;
    for (const RunRecord& r : records) {
        series[{r.scenario.id, r.label}][r.scenario.n_tasks] = r.ok() ? r.metrics.dmr : 1.0;
    }
    std::map<SeriesKey, std::size_t> out;
    for (const auto& [key, rates] : series) {
        out[key] = pivot_point(rates);
    }
    return out;
}

std::vector<CsvRow> to_rows(const std::vector<RunRecord>& records) {
    std::map<SeriesKey, std::size_t> pivots;
    try {
        pivots = sweep_pivots(records);
    } catch (const ModelError&) {
        // Sweeps that are not contiguous from 0/1 have no pivot to flag.
    }
    std::vector<CsvRow> rows;
    rows.reserve(records.size());
    for (const RunRecord& r : records) {
        CsvRow row;
        row.scenario_id = r.scenario.id;
        row.scheduler = r.label;
        row.n_contexts = r.scenario.pool.contexts;
        row.os = r.scenario.pool.over_subscription;
        row.n_tasks = r.scenario.n_tasks;
        if (r.ok()) {
            row.total_fps = r.metrics.total_fps;
            row.dmr = r.metrics.dmr;
            row.jobs_released = r.metrics.jobs_released;
            row.jobs_missed = r.metrics.jobs_missed;
        } else {
            row.total_fps = std::nan("");
            row.dmr = std::nan("");
        }
        const auto it = pivots.find({row.scenario_id, row.scheduler});
        row.pivot_flag = it != pivots.end() && it->second == row.n_tasks;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
    out << kCsvHeader << '\n';
    for (const CsvRow& r : rows) {
        out << r.scenario_id << ',' << r.scheduler << ',' << r.n_contexts << ',' << fmt("%.2f", r.os) << ','
            << r.n_tasks << ',' << fmt("%.3f", r.total_fps) << ',' << fmt("%.6f", r.dmr) << ',' << r.jobs_released
            << ',' << r.jobs_missed << ',' << (r.pivot_flag ? 1 : 0) << '\n';
    }
}

std::vector<CsvRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw ModelError("results CSV: unexpected header");
    }
    std::vector<CsvRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto cells = split_csv(line);
        if (cells.size() != 10) {
            throw ModelError("results CSV line " + std::to_string(line_no) + ": expected 10 columns");
        }
        try {
            CsvRow r;
            r.scenario_id = cells[0];
            r.scheduler = cells[1];
            r.n_contexts = static_cast<std::uint32_t>(std::stoul(cells[2]));
            r.os = std::stod(cells[3]);
            r.n_tasks = static_cast<std::uint32_t>(std::stoul(cells[4]));
            r.total_fps = std::stod(cells[5]);
            r.dmr = std::stod(cells[6]);
            r.jobs_released = std::stoull(cells[7]);
            r.jobs_missed = std::stoull(cells[8]);
            r.pivot_flag = cells[9] == "1";
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ModelError("results CSV line " + std::to_string(line_no) + ": malformed value");
        }
    }
    return rows;
}

std::vector<PivotSummary> report_pivots(const std::vector<CsvRow>& rows) {
    std::vector<PivotSummary> out;
    for_each_series(rows, [&](const SeriesKey& key, const std::vector<const CsvRow*>& g) {
        std::map<std::size_t, double> rates;
        PivotSummary s;
        s.scenario_id = key.first;
        s.scheduler = key.second;
        s.n_contexts = g.front()->n_contexts;
        s.os = g.front()->os;
        for (const CsvRow* r : g) {
            if (!rates.emplace(r->n_tasks, std::isnan(r->dmr) ? 1.0 : r->dmr).second) {
                throw ModelError("series " + key.first + "/" + key.second + " repeats n_tasks " +
                                 std::to_string(r->n_tasks));
            }
            if (!std::isnan(r->total_fps)) {
                s.peak_fps = std::max(s.peak_fps, r->total_fps);
            }
        }
        try {
            s.pivot = pivot_point(rates);
        } catch (const ModelError& e) {
            throw ModelError("series " + key.first + "/" + key.second + ": " + e.what());
        }
        s.max_tasks = g.back()->n_tasks;
        s.fps_at_max = g.back()->total_fps;
        out.push_back(std::move(s));
    });
    return out;
}

void write_pivot_table(std::ostream& out, const std::vector<PivotSummary>& pivots) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %-12s %8s %6s %6s %10s %12s\n", "scenario", "scheduler", "contexts", "os",
                  "pivot", "peak_fps", "fps@max_n");
    out << buf;
    for (const PivotSummary& p : pivots) {
        std::snprintf(buf, sizeof buf, "%-12s %-12s %8u %6.2f %6zu %10.1f %12.1f\n", p.scenario_id.c_str(),
                      p.scheduler.c_str(), p.n_contexts, p.os, p.pivot, p.peak_fps, p.fps_at_max);
        out << buf;
    }
}

void write_pivot_csv(std::ostream& out, const std::vector<PivotSummary>& pivots) {
    out << "scenario_id,scheduler,n_contexts,os,pivot,peak_fps,max_tasks,fps_at_max\n";
    for (const PivotSummary& p : pivots) {
        out << p.scenario_id << ',' << p.scheduler << ',' << p.n_contexts << ',' << fmt("%.2f", p.os) << ','
            << p.pivot << ',' << fmt("%.3f", p.peak_fps) << ',' << p.max_tasks << ',' << fmt("%.3f", p.fps_at_max)
            << '\n';
    }
}

std::vector<std::filesystem::path> write_series(const std::filesystem::path& dir, const std::vector<CsvRow>& rows) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for_each_series(rows, [&](const SeriesKey& key, const std::vector<const CsvRow*>& g) {
        const std::string stem = key.first + "_" + key.second;
        const auto fps_path = dir / (stem + "_fps.dat");
        const auto dmr_path = dir / (stem + "_dmr.dat");
        std::ofstream fps(fps_path);
        std::ofstream miss(dmr_path);
        fps << "# " << key.first << ' ' << key.second << "\n# n_tasks total_fps\n";
        miss << "# " << key.first << ' ' << key.second << "\n# n_tasks dmr\n";
        for (const CsvRow* r : g) {
            fps << r->n_tasks << ' ' << fmt("%.3f", r->total_fps) << '\n';
            miss << r->n_tasks << ' ' << fmt("%.6f", r->dmr) << '\n';
        }
        written.push_back(fps_path);
        written.push_back(dmr_path);
    });
    return written;
}

namespace {

constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

void svg_panel(std::ostream& out, double x0, double y0, double w, double h, const std::string& title, double y_max,
               const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& lines,
               double x_max) {
    out << "<g transform=\"translate(" << x0 << ',' << y0 << ")\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"-8\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y_max * i / 4.0;
        const double py = h - h * i / 4.0;
        out << "<line x1=\"0\" x2=\"" << w << "\" y1=\"" << py << "\" y2=\"" << py << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"-5\" y=\"" << py + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << fmt("%g", yv)
            << "</text>\n";
    }
    out << "<text x=\"" << w / 2 << "\" y=\"" << h + 28 << "\" text-anchor=\"middle\" font-size=\"11\">tasks</text>\n";
    out << "<text x=\"0\" y=\"" << h + 14 << "\" font-size=\"10\">0</text>\n";
    out << "<text x=\"" << w << "\" y=\"" << h + 14 << "\" text-anchor=\"end\" font-size=\"10\">" << x_max
        << "</text>\n";
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const char* color = kPalette[i % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : lines[i].second) {
            const double px = x_max > 0 ? w * x / x_max : 0.0;
            const double py = y_max > 0 ? h - h * std::min(y, y_max) / y_max : h;
            out << fmt("%.2f", px) << ',' << fmt("%.2f", py) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << w + 8 << "\" y=\"" << 14 + 14 * i << "\" font-size=\"11\" fill=\"" << color << "\">"
            << lines[i].first << "</text>\n";
    }
    out << "</g>\n";
}

}  // namespace

std::vector<std::filesystem::path> write_svg(const std::filesystem::path& dir, const std::vector<CsvRow>& rows) {
    std::filesystem::create_directories(dir);
    using Line = std::pair<std::string, std::vector<std::pair<double, double>>>;
    std::vector<std::string> order;
    std::map<std::string, std::vector<Line>> fps_lines;
    std::map<std::string, std::vector<Line>> dmr_lines;
    std::map<std::string, double> fps_max;
    std::map<std::string, double> x_max;
    for_each_series(rows, [&](const SeriesKey& key, const std::vector<const CsvRow*>& g) {
        if (!fps_lines.count(key.first)) {
            order.push_back(key.first);
        }
        Line f{key.second, {}};
        Line d{key.second, {}};
        for (const CsvRow* r : g) {
            f.second.emplace_back(r->n_tasks, std::isnan(r->total_fps) ? 0.0 : r->total_fps);
            d.second.emplace_back(r->n_tasks, std::isnan(r->dmr) ? 1.0 : r->dmr);
            fps_max[key.first] = std::max(fps_max[key.first], f.second.back().second);
            x_max[key.first] = std::max<double>(x_max[key.first], r->n_tasks);
        }
        fps_lines[key.first].push_back(std::move(f));
        dmr_lines[key.first].push_back(std::move(d));
    });
    std::vector<std::filesystem::path> written;
    for (const std::string& id : order) {
        const auto path = dir / (id + ".svg");
        std::ofstream out(path);
        const double y_fps = std::max(1.0, std::ceil(fps_max[id] / 100.0) * 100.0);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"980\" height=\"340\" font-family=\"sans-serif\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg_panel(out, 60, 40, 340, 240, id + ": total FPS", y_fps, fps_lines[id], x_max[id]);
        svg_panel(out, 560, 40, 320, 240, id + ": deadline miss rate", 1.0, dmr_lines[id], x_max[id]);
        out << "</svg>\n";
        written.push_back(path);
    }
    return written;
}

std::vector<std::filesystem::path> write_traces(const std::filesystem::path& dir,
                                                const std::vector<RunRecord>& records) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const RunRecord& r : records) {
        const auto path = dir / (r.scenario.id + "_" + r.label + "_n" + std::to_string(r.scenario.n_tasks) + ".tsv");
        std::ofstream out(path);
        out << "time_ms\tkind\ttask\tinstance\tstage\tcontext\tdetail\n";
        for (const TraceRecord& t : r.trace) {
            write_trace_line(out, t);
        }
        written.push_back(path);
    }
    return written;
}

std::size_t best_sgprs_pivot(std::vector<Scenario> scenario_runs, double frame_wcet_ms, unsigned jobs) {
    std::erase_if(scenario_runs, [](const Scenario& s) { return s.scheduler != SchedulerKind::Sgprs; });
    if (scenario_runs.empty()) {
        throw ModelError("calibration: no SGPRS runs in the scenario");
    }
    for (Scenario& s : scenario_runs) {
        s.task.frame_wcet_ms = frame_wcet_ms;
    }
    std::size_t best = 0;
    for (const auto& [key, pivot] : sweep_pivots(run_sweep(scenario_runs, {jobs, false}))) {
        best = std::max(best, pivot);
    }
    return best;
}

CalibrationResult calibrate_frame_wcet(const std::vector<Scenario>& scenario_runs, const CalibrationOptions& options) {
    if (!(options.lo_ms > 0.0) || !(options.hi_ms > options.lo_ms) || options.target_min > options.target_max) {
        throw ModelError("calibration: invalid bracket");
    }
    CalibrationResult result;
    double lo = options.lo_ms;
    double hi = options.hi_ms;
    for (int it = 0; it < options.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const std::size_t pivot = best_sgprs_pivot(scenario_runs, mid, options.jobs);
        result.steps.push_back({mid, pivot});
        result.frame_wcet_ms = mid;
        result.best_pivot = pivot;
        if (pivot >= options.target_min && pivot <= options.target_max) {
            result.converged = true;
            break;
        }
        // A larger frame WCET means fewer tasks fit.
        if (pivot > options.target_max) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return result;
}

}  // namespace sgprs
