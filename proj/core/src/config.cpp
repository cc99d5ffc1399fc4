#include <sgprs/config.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

namespace sgprs {

ConfigError::ConfigError(std::string origin, int line, const std::string& message)
    : std::runtime_error(origin + ":" + std::to_string(line) + ": " + message), line_(line) {}

namespace {

struct Value {
    enum class Kind { Number, String, Bool, Array, Range } kind = Kind::Number;
    double number = 0.0;
    std::string text;
    bool flag = false;
    std::vector<Value> items;
    long long lo = 0;
    long long hi = 0;
};

struct Entry {
    std::string key;
    Value value;
    int line = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<Entry> entries;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

bool bare_key(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
            return false;
        }
    }
    return true;
}

/// Drops a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

int bracket_balance(std::string_view s) {
    int depth = 0;
    bool quoted = false;
    for (char c : s) {
        if (c == '"') {
            quoted = !quoted;
        } else if (!quoted && c == '[') {
            ++depth;
        } else if (!quoted && c == ']') {
            --depth;
        }
    }
    return depth;
}

class ValueParser {
public:
    ValueParser(std::string_view text, const std::string& origin, int line)
        : text_(text), origin_(origin), line_(line) {}

    Value parse_all() {
        Value v = parse();
        skip_ws();
        if (pos_ != text_.size()) {
            fail("unexpected trailing characters");
        }
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(origin_, line_, msg); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    Value parse() {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("missing value");
        }
        const char c = text_[pos_];
        if (c == '[') {
            return parse_array();
        }
        if (c == '"') {
            return parse_string();
        }
        return parse_scalar();
    }

    Value parse_array() {
        Value v;
        v.kind = Value::Kind::Array;
        ++pos_;
        while (true) {
            skip_ws();
            if (pos_ >= text_.size()) {
                fail("unterminated array");
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return v;
            }
            v.items.push_back(parse());
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == ',') {
                ++pos_;
            } else if (pos_ >= text_.size() || text_[pos_] != ']') {
                fail("expected ',' or ']' in array");
            }
        }
    }

    Value parse_string() {
        Value v;
        v.kind = Value::Kind::String;
        ++pos_;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
                ++pos_;
            }
            v.text.push_back(text_[pos_++]);
        }
        if (pos_ >= text_.size()) {
            fail("unterminated string");
        }
        ++pos_;
        return v;
    }

    static std::optional<double> to_number(const std::string& tok) {
        if (tok.empty()) {
            return std::nullopt;
        }
        char* end = nullptr;
        const double d = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(d)) {
            return std::nullopt;
        }
        return d;
    }

    Value parse_scalar() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
               !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        const std::string tok(text_.substr(start, pos_ - start));
        Value v;
        if (tok == "true" || tok == "false") {
            v.kind = Value::Kind::Bool;
            v.flag = tok == "true";
            return v;
        }
        if (const auto dots = tok.find(".."); dots != std::string::npos) {
            const auto lo = to_number(tok.substr(0, dots));
            const auto hi = to_number(tok.substr(dots + 2));
            if (!lo || !hi || *lo != std::floor(*lo) || *hi != std::floor(*hi) || *hi < *lo) {
                fail("invalid range '" + tok + "' (expected a..b with integers a <= b)");
            }
            v.kind = Value::Kind::Range;
            v.lo = static_cast<long long>(*lo);
            v.hi = static_cast<long long>(*hi);
            return v;
        }
        const auto d = to_number(tok);
        if (!d) {
            fail("invalid value '" + tok + "'");
        }
        v.kind = Value::Kind::Number;
        v.number = *d;
        return v;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    const std::string& origin_;
    int line_;
};

struct Document {
    std::vector<Entry> defaults;
    std::vector<Section> scenarios;
    std::vector<Section> curves;
};

Document read_document(const std::string& text, const std::string& origin) {
    Document doc;
    std::vector<Entry>* target = &doc.defaults;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = strip_comment(raw);
        std::string_view body = trim(line);
        if (body.empty()) {
            continue;
        }
        if (body.front() == '[') {
            if (body.back() != ']') {
                throw ConfigError(origin, line_no, "malformed section header");
            }
            const std::string_view name = trim(body.substr(1, body.size() - 2));
            const auto dot = name.find('.');
            const std::string_view kind = name.substr(0, dot);
            const std::string_view id = dot == std::string_view::npos ? std::string_view{} : name.substr(dot + 1);
            if ((kind != "scenario" && kind != "curve") || !bare_key(id)) {
                throw ConfigError(origin, line_no,
                                  "unknown section '" + std::string(name) + "' (expected [scenario.<id>] or [curve.<id>])");
            }
            auto& list = kind == "scenario" ? doc.scenarios : doc.curves;
            for (const Section& s : list) {
                if (s.name == id) {
                    throw ConfigError(origin, line_no, "duplicate section '" + std::string(name) + "'");
                }
            }
            list.push_back(Section{std::string(id), line_no, {}});
            target = &list.back().entries;
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(origin, line_no, "expected 'key = value'");
        }
        const std::string key(trim(body.substr(0, eq)));
        if (!bare_key(key)) {
            throw ConfigError(origin, line_no, "invalid key '" + key + "'");
        }
        for (const Entry& e : *target) {
            if (e.key == key) {
                throw ConfigError(origin, line_no, "duplicate key '" + key + "'");
            }
        }
        std::string value(trim(body.substr(eq + 1)));
        const int start_line = line_no;
        while (bracket_balance(value) > 0 && std::getline(in, raw)) {
            ++line_no;
            value += ' ';
            value += trim(strip_comment(raw));
        }
        ValueParser parser(value, origin, start_line);
        target->push_back(Entry{key, parser.parse_all(), start_line});
    }
    return doc;
}

class Builder {
public:
    explicit Builder(const std::string& origin) : origin_(origin) {}

    [[noreturn]] void fail(int line, const std::string& msg) const { throw ConfigError(origin_, line, msg); }

    double number(const Entry& e) const {
        if (e.value.kind != Value::Kind::Number) {
            fail(e.line, "'" + e.key + "' expects a number");
        }
        return e.value.number;
    }

    double positive(const Entry& e) const {
        const double d = number(e);
        if (!(d > 0.0)) {
            fail(e.line, "'" + e.key + "' must be > 0");
        }
        return d;
    }

    std::uint64_t integer(const Entry& e, std::uint64_t min, double max = 4294967295.0) const {
        const double d = number(e);
        if (d != std::floor(d) || d < static_cast<double>(min) || d > max) {
            fail(e.line, "'" + e.key + "' expects an integer >= " + std::to_string(min));
        }
        return static_cast<std::uint64_t>(d);
    }

    bool boolean(const Entry& e) const {
        if (e.value.kind != Value::Kind::Bool) {
            fail(e.line, "'" + e.key + "' expects true or false");
        }
        return e.value.flag;
    }

    std::string string(const Entry& e, const Value& v) const {
        if (v.kind != Value::Kind::String) {
            fail(e.line, "'" + e.key + "' expects a string");
        }
        return v.text;
    }

    std::vector<double> numbers(const Entry& e, const Value& v) const {
        if (v.kind != Value::Kind::Array) {
            fail(e.line, "'" + e.key + "' expects an array of numbers");
        }
        std::vector<double> out;
        for (const Value& item : v.items) {
            if (item.kind != Value::Kind::Number) {
                fail(e.line, "'" + e.key + "' expects an array of numbers");
            }
            out.push_back(item.number);
        }
        return out;
    }

    std::vector<std::string> strings(const Entry& e) const {
        std::vector<std::string> out;
        if (e.value.kind == Value::Kind::Array) {
            for (const Value& item : e.value.items) {
                out.push_back(string(e, item));
            }
        } else {
            out.push_back(string(e, e.value));
        }
        if (out.empty()) {
            fail(e.line, "'" + e.key + "' must not be empty");
        }
        return out;
    }

    SpeedupCurve curve(const Section& sec, const CurveSet& known) const {
        if (sec.entries.size() != 1) {
            fail(sec.line, "curve '" + sec.name + "' needs exactly one of amdahl, anchors, compose");
        }
        const Entry& e = sec.entries.front();
        try {
            if (e.key == "amdahl") {
                const std::vector<double> p = numbers(e, e.value);
                if (p.size() != 2 || p[1] != std::floor(p[1]) || p[1] < 2) {
                    fail(e.line, "amdahl expects [gain, sm_count]");
                }
                return amdahl_fit(sec.name, p[0], static_cast<std::uint32_t>(p[1]));
            }
            if (e.key == "anchors") {
                if (e.value.kind != Value::Kind::Array) {
                    fail(e.line, "anchors expects [[sm, gain], ...]");
                }
                std::vector<Anchor> anchors;
                for (const Value& item : e.value.items) {
                    const std::vector<double> pair = numbers(e, item);
                    if (pair.size() != 2) {
                        fail(e.line, "anchors expects [[sm, gain], ...]");
                    }
                    anchors.push_back({pair[0], pair[1]});
                }
                return SpeedupCurve(sec.name, std::move(anchors));
            }
            if (e.key == "compose") {
                if (e.value.kind != Value::Kind::Array || e.value.items.empty()) {
                    fail(e.line, "compose expects [[\"curve\", share], ...]");
                }
                std::vector<CurvePart> parts;
                for (const Value& item : e.value.items) {
                    if (item.kind != Value::Kind::Array || item.items.size() != 2 ||
                        item.items[0].kind != Value::Kind::String || item.items[1].kind != Value::Kind::Number) {
                        fail(e.line, "compose expects [[\"curve\", share], ...]");
                    }
                    const std::string& id = item.items[0].text;
                    if (!known.contains(id)) {
                        fail(e.line, "compose references unknown curve '" + id + "'");
                    }
                    parts.push_back(CurvePart{std::cref(known.at(id)), item.items[1].number});
                }
                return compose_network_curve(sec.name, parts);
            }
        } catch (const ModelError& err) {
            fail(e.line, err.what());
        }
        fail(e.line, "unknown curve key '" + e.key + "' (expected amdahl, anchors or compose)");
    }

    struct Sweep {
        std::vector<std::uint32_t> n_tasks{1};
        std::vector<std::pair<SchedulerKind, double>> variants;
        std::vector<SchedulerKind> schedulers{SchedulerKind::Sgprs};
        std::vector<double> os{1.0};
        bool explicit_variants = false;
        int scheduler_line = 0;
        int os_line = 0;
        std::map<std::string, int> lines;  // key -> line, for diagnostics
    };

    SchedulerKind scheduler_kind(const Entry& e, const std::string& name) const {
        if (name == "naive") {
            return SchedulerKind::Naive;
        }
        if (name == "sgprs") {
            return SchedulerKind::Sgprs;
        }
        fail(e.line, "unknown scheduler '" + name + "' (expected naive or sgprs)");
    }

    double over_subscription(const Entry& e, double v) const {
        if (!(v >= 1.0) || !std::isfinite(v)) {
            fail(e.line, "over-subscription must be >= 1.0");
        }
        return v;
    }

    void apply(Scenario& s, Sweep& sweep, const Entry& e) const {
        sweep.lines[e.key] = e.line;
        const std::string& k = e.key;
        if (k == "total_sms") {
            s.pool.total_sms = static_cast<std::uint32_t>(integer(e, 1));
        } else if (k == "contexts") {
            s.pool.contexts = static_cast<std::uint32_t>(integer(e, 1));
        } else if (k == "stages") {
            s.task.stage_count = static_cast<std::uint32_t>(integer(e, 1));
        } else if (k == "stage_weights") {
            s.task.stage_weights = numbers(e, e.value);
            for (double w : s.task.stage_weights) {
                if (!(w > 0.0)) {
                    fail(e.line, "stage weights must be > 0");
                }
            }
        } else if (k == "stage_curve") {
            s.task.stage_curves = strings(e);
        } else if (k == "frame_wcet_ms") {
            s.task.frame_wcet_ms = positive(e);
        } else if (k == "reference_sms") {
            s.task.reference_sms = positive(e);
        } else if (k == "fps") {
            s.task.fps = positive(e);
        } else if (k == "deadline_ms") {
            s.task.deadline_ms = positive(e);
        } else if (k == "stage_overhead_ms") {
            const double d = number(e);
            if (d < 0.0) {
                fail(e.line, "stage_overhead_ms must be >= 0");
            }
            s.task.stage_overhead_ms = d;
        } else if (k == "horizon_s") {
            s.horizon_s = positive(e);
        } else if (k == "warmup_s") {
            const double d = number(e);
            if (d < 0.0) {
                fail(e.line, "warmup_s must be >= 0");
            }
            s.warmup_s = d;
        } else if (k == "slot_borrowing") {
            s.flags.slot_borrowing = boolean(e);
        } else if (k == "drop_on_overrun") {
            s.flags.drop_on_overrun = boolean(e);
        } else if (k == "queue_metric") {
            const std::string m = string(e, e.value);
            if (m == "count") {
                s.flags.queue_metric = QueueMetric::Count;
            } else if (m == "work") {
                s.flags.queue_metric = QueueMetric::Work;
            } else {
                fail(e.line, "queue_metric must be \"count\" or \"work\"");
            }
        } else if (k == "seed") {
            s.seed = integer(e, 0, 9007199254740992.0);
        } else if (k == "n_tasks") {
            sweep.n_tasks.clear();
            if (e.value.kind == Value::Kind::Range) {
                if (e.value.lo < 0) {
                    fail(e.line, "n_tasks must be >= 0");
                }
                for (long long n = e.value.lo; n <= e.value.hi; ++n) {
                    sweep.n_tasks.push_back(static_cast<std::uint32_t>(n));
                }
            } else if (e.value.kind == Value::Kind::Array) {
                for (double d : numbers(e, e.value)) {
                    if (d < 0 || d != std::floor(d)) {
                        fail(e.line, "n_tasks must be non-negative integers");
                    }
                    sweep.n_tasks.push_back(static_cast<std::uint32_t>(d));
                }
                if (sweep.n_tasks.empty()) {
                    fail(e.line, "n_tasks must not be empty");
                }
            } else {
                sweep.n_tasks.push_back(static_cast<std::uint32_t>(integer(e, 0)));
            }
        } else if (k == "scheduler") {
            sweep.schedulers.clear();
            for (const std::string& name : strings(e)) {
                sweep.schedulers.push_back(scheduler_kind(e, name));
            }
            sweep.scheduler_line = e.line;
        } else if (k == "os") {
            sweep.os.clear();
            if (e.value.kind == Value::Kind::Array) {
                for (double d : numbers(e, e.value)) {
                    sweep.os.push_back(over_subscription(e, d));
                }
                if (sweep.os.empty()) {
                    fail(e.line, "os must not be empty");
                }
            } else {
                sweep.os.push_back(over_subscription(e, number(e)));
            }
            sweep.os_line = e.line;
        } else if (k == "variants") {
            sweep.variants.clear();
            sweep.explicit_variants = true;
            for (const std::string& name : strings(e)) {
                sweep.variants.push_back(parse_variant(e, name));
            }
        } else {
            fail(e.line, "unknown key '" + k + "'");
        }
    }

    /// "naive", "sgprs" or "<scheduler>_<os>".
    std::pair<SchedulerKind, double> parse_variant(const Entry& e, const std::string& name) const {
        const auto us = name.find('_');
        if (us == std::string::npos) {
            return {scheduler_kind(e, name), 1.0};
        }
        const SchedulerKind kind = scheduler_kind(e, name.substr(0, us));
        const std::string os = name.substr(us + 1);
        char* end = nullptr;
        const double v = std::strtod(os.c_str(), &end);
        if (os.empty() || end != os.c_str() + os.size()) {
            fail(e.line, "invalid variant '" + name + "' (expected e.g. sgprs_1.5)");
        }
        return {kind, over_subscription(e, v)};
    }

private:
    const std::string& origin_;
};

std::string format_number(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::vector<Scenario> parse_config_text(const std::string& text, const std::string& origin) {
    const Document doc = read_document(text, origin);
    Builder b(origin);

    CurveSet curves = default_curves();
    for (const Section& sec : doc.curves) {
        curves.add(b.curve(sec, curves));
    }

    std::vector<Section> scenarios = doc.scenarios;
    if (scenarios.empty()) {
        scenarios.push_back(Section{"default", 1, {}});
    }

    std::vector<Scenario> out;
    for (const Section& sec : scenarios) {
        Scenario base;
        base.id = sec.name;
        base.curves = curves;
        Builder::Sweep sweep;
        for (const Entry& e : doc.defaults) {
            b.apply(base, sweep, e);
        }
        for (const Entry& e : sec.entries) {
            b.apply(base, sweep, e);
        }
        if (sweep.explicit_variants && (sweep.scheduler_line != 0 || sweep.os_line != 0)) {
            b.fail(std::max(sweep.scheduler_line, sweep.os_line), "use either 'variants' or 'scheduler'/'os', not both");
        }
        if (!sweep.explicit_variants) {
            for (SchedulerKind kind : sweep.schedulers) {
                for (double os : sweep.os) {
                    sweep.variants.emplace_back(kind, os);
                }
            }
        }
        for (const std::string& id : base.task.stage_curves) {
            if (!curves.contains(id)) {
                const auto it = sweep.lines.find("stage_curve");
                b.fail(it == sweep.lines.end() ? sec.line : it->second, "unknown curve '" + id + "'");
            }
        }
        for (const auto& [kind, os] : sweep.variants) {
            for (std::uint32_t n : sweep.n_tasks) {
                Scenario s = base;
                s.scheduler = kind;
                s.pool.over_subscription = os;
                s.n_tasks = n;
                try {
                    validate_scenario(s);
                } catch (const ModelError& err) {
                    b.fail(sec.line, err.what());
                }
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

std::vector<Scenario> parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path.string(), 0, "cannot open file");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path.string());
}

std::string emit_config(const Scenario& s) {
    std::ostringstream out;
    const TaskTemplate& t = s.task;
    out << "# single run, canonical form\n";
    out << "total_sms = " << s.pool.total_sms << '\n';
    out << "contexts = " << s.pool.contexts << '\n';
    out << "os = " << format_number(s.pool.over_subscription) << '\n';
    out << "scheduler = " << quoted(to_string(s.scheduler)) << '\n';
    out << "n_tasks = " << s.n_tasks << '\n';
    out << "stages = " << t.stage_count << '\n';
    if (!t.stage_weights.empty()) {
        out << "stage_weights = [";
        for (std::size_t i = 0; i < t.stage_weights.size(); ++i) {
            out << (i ? ", " : "") << format_number(t.stage_weights[i]);
        }
        out << "]\n";
    }
    out << "stage_curve = [";
    for (std::size_t i = 0; i < t.stage_curves.size(); ++i) {
        out << (i ? ", " : "") << quoted(t.stage_curves[i]);
    }
    out << "]\n";
    out << "frame_wcet_ms = " << format_number(t.frame_wcet_ms) << '\n';
    out << "reference_sms = " << format_number(t.reference_sms) << '\n';
    out << "fps = " << format_number(t.fps) << '\n';
    if (t.deadline_ms) {
        out << "deadline_ms = " << format_number(*t.deadline_ms) << '\n';
    }
    out << "stage_overhead_ms = " << format_number(t.stage_overhead_ms) << '\n';
    out << "horizon_s = " << format_number(s.horizon_s) << '\n';
    out << "warmup_s = " << format_number(s.warmup_s) << '\n';
    out << "slot_borrowing = " << (s.flags.slot_borrowing ? "true" : "false") << '\n';
    out << "queue_metric = " << quoted(to_string(s.flags.queue_metric)) << '\n';
    out << "drop_on_overrun = " << (s.flags.drop_on_overrun ? "true" : "false") << '\n';
    out << "seed = " << s.seed << '\n';
    for (const auto& [id, curve] : s.curves.all()) {
        out << "\n[curve." << id << "]\nanchors = [";
        const auto anchors = curve.anchors();
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            out << (i ? ", " : "") << '[' << format_number(anchors[i].sm) << ", " << format_number(anchors[i].gain)
                << ']';
        }
        out << "]\n";
    }
    out << "\n[scenario." << s.id << "]\n";
    return out.str();
}

}  // namespace sgprs
