#include <sgprs/speedup.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace sgprs {

SpeedupCurve::SpeedupCurve(std::string id, std::vector<Anchor> anchors)
    : id_(std::move(id)), anchors_(std::move(anchors)) {
    const std::string where = "curve '" + id_ + "': ";
    if (anchors_.empty()) {
        throw ModelError(where + "needs at least one anchor");
    }
    if (anchors_.front().sm != 1.0 || anchors_.front().gain != 1.0) {
        throw ModelError(where + "first anchor must be (1, 1)");
    }
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
        const Anchor& a = anchors_[i];
        if (!std::isfinite(a.sm) || !std::isfinite(a.gain) || a.gain <= 0.0) {
            throw ModelError(where + "anchors must be finite and positive");
        }
        if (i == 0) {
            continue;
        }
        const Anchor& prev = anchors_[i - 1];
        if (a.sm <= prev.sm) {
            throw ModelError(where + "anchor SM counts must be strictly increasing");
        }
        if (a.gain < prev.gain) {
            throw ModelError(where + "gain must be non-decreasing");
        }
        // gain/sm non-increasing, written multiplicatively; tolerate rounding
        // from curves that were sampled from a closed form.
        if (a.gain * prev.sm > prev.gain * a.sm * (1.0 + 1e-12)) {
            throw ModelError(where + "super-linear speedup between anchors");
        }
    }
}

double SpeedupCurve::gain(double sms) const {
    if (!(sms > 0.0)) {
        throw ModelError("curve '" + id_ + "': SM count must be > 0");
    }
    if (sms <= anchors_.front().sm) {
        return anchors_.front().gain;
    }
    if (sms >= anchors_.back().sm) {
        return anchors_.back().gain;
    }
    auto hi = std::upper_bound(anchors_.begin(), anchors_.end(), sms,
                               [](double s, const Anchor& a) { return s < a.sm; });
    auto lo = hi - 1;
    if (lo->sm == sms) {
        return lo->gain;
    }
    const double t = (sms - lo->sm) / (hi->sm - lo->sm);
    return lo->gain + t * (hi->gain - lo->gain);
}

double amdahl_parallel_fraction(double gain_at_n, double n) {
    if (!(n > 1.0)) {
        throw ModelError("amdahl_fit: SM count must be > 1");
    }
    if (!(gain_at_n > 1.0)) {
        throw ModelError("amdahl_fit: gain must be > 1");
    }
    if (gain_at_n >= n) {
        throw ModelError("amdahl_fit: gain must be below the SM count (parallel fraction would exceed 1)");
    }
    return (1.0 - 1.0 / gain_at_n) / (1.0 - 1.0 / n);
}

SpeedupCurve amdahl_fit(std::string id, double gain_at_n, std::uint32_t n) {
    const double p = amdahl_parallel_fraction(gain_at_n, static_cast<double>(n));
    std::vector<Anchor> anchors;
    for (double s : kSampleGrid) {
        if (s >= n) {
            break;
        }
        const double g = s == 1.0 ? 1.0 : 1.0 / ((1.0 - p) + p / s);
        anchors.push_back({s, g});
    }
    anchors.push_back({static_cast<double>(n), gain_at_n});
    return SpeedupCurve(std::move(id), std::move(anchors));
}

SpeedupCurve compose_network_curve(std::string id, std::span<const CurvePart> parts) {
    if (parts.empty()) {
        throw ModelError("compose_network_curve: no parts");
    }
    double total = 0.0;
    std::set<double> grid;
    for (const CurvePart& part : parts) {
        if (!(part.share > 0.0)) {
            throw ModelError("compose_network_curve: shares must be positive");
        }
        total += part.share;
        for (const Anchor& a : part.curve.get().anchors()) {
            grid.insert(a.sm);
        }
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ModelError("compose_network_curve: shares must sum to 1");
    }
    std::vector<Anchor> anchors;
    anchors.reserve(grid.size());
    for (double s : grid) {
        double inv = 0.0;
        for (const CurvePart& part : parts) {
            inv += part.share / part.curve.get().gain(s);
        }
        anchors.push_back({s, s == 1.0 ? 1.0 : 1.0 / inv});
    }
    return SpeedupCurve(std::move(id), std::move(anchors));
}

double harmonic_share(double first_gain, double second_gain, double target) {
    const double lo = std::min(first_gain, second_gain);
    const double hi = std::max(first_gain, second_gain);
    if (first_gain == second_gain || target < lo || target > hi) {
        throw ModelError("harmonic_share: target gain must lie between the two part gains");
    }
    return (1.0 / second_gain - 1.0 / target) / (1.0 / second_gain - 1.0 / first_gain);
}

double stage_work(const Stage& stage, const SpeedupCurve& curve) {
    return stage.wcet_ref * curve.gain(stage.reference_sms);
}

Millis exec_time(const Stage& stage, const SpeedupCurve& curve, double sms) {
    const double g = curve.gain(sms);
    if (sms == stage.reference_sms) {
        return stage.wcet_ref;
    }
    return stage_work(stage, curve) / g;
}

void CurveSet::add(SpeedupCurve curve) {
    std::string id = curve.id();
    curves_.insert_or_assign(std::move(id), std::move(curve));
}

const SpeedupCurve& CurveSet::at(const std::string& id) const {
    auto it = curves_.find(id);
    if (it == curves_.end()) {
        throw ModelError("unknown speedup curve '" + id + "'");
    }
    return it->second;
}

CurveSet default_curves(const DefaultGains& gains) {
    CurveSet set;
    SpeedupCurve conv = amdahl_fit("conv", gains.conv, gains.sms);
    SpeedupCurve other = amdahl_fit("other", gains.other, gains.sms);
    const double conv_share = harmonic_share(gains.conv, gains.other, gains.network);
    const CurvePart parts[] = {{std::cref(conv), conv_share}, {std::cref(other), 1.0 - conv_share}};
    set.add(compose_network_curve("resnet18", parts));
    set.add(amdahl_fit("maxpool", gains.maxpool, gains.sms));
    set.add(std::move(conv));
    set.add(std::move(other));
    return set;
}

}  // namespace sgprs
