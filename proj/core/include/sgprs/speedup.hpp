#pragma once

#include <sgprs/model.hpp>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sgprs {

struct Anchor {
    double sm = 1.0;
    double gain = 1.0;

    bool operator==(const Anchor&) const = default;
};

/// Monotone, sublinear map from SM count to speedup over a single SM.
///
/// Anchors start at (1, 1), are strictly increasing in SMs, non-decreasing in
/// gain, and never gain more than linearly (gain/sm is non-increasing).
/// Between anchors the curve is piecewise linear; outside it is clamped.
class SpeedupCurve {
public:
    SpeedupCurve(std::string id, std::vector<Anchor> anchors);

    const std::string& id() const { return id_; }
    std::span<const Anchor> anchors() const { return anchors_; }

    /// Speedup with `sms` SMs (fractional allowed). Throws ModelError for sms <= 0.
    double gain(double sms) const;

    bool operator==(const SpeedupCurve&) const = default;

private:
    std::string id_;
    std::vector<Anchor> anchors_;
};

/// SM counts at which parametric curves are sampled.
inline constexpr double kSampleGrid[] = {1, 2, 4, 8, 16, 24, 34, 48, 68};

/// Parallel fraction p of the Amdahl form 1/((1-p) + p/s) that passes through (n, gain_at_n).
double amdahl_parallel_fraction(double gain_at_n, double n);

/// Amdahl curve through (1, 1) and (n, gain_at_n), sampled on the grid below n plus n itself.
SpeedupCurve amdahl_fit(std::string id, double gain_at_n, std::uint32_t n);

struct CurvePart {
    std::reference_wrapper<const SpeedupCurve> curve;
    double share;  ///< fraction of execution time at gain 1
};

/// Harmonic composition: 1 / sum(share_k / gain_k(s)), sampled at the union of part anchors.
SpeedupCurve compose_network_curve(std::string id, std::span<const CurvePart> parts);

/// Share of the first curve such that composing it with the second reaches `target`
/// (solves 1/target = a/first + (1-a)/second).
double harmonic_share(double first_gain, double second_gain, double target);

/// Execution time at gain 1: wcet_ref * gain(reference_sms).
double stage_work(const Stage& stage, const SpeedupCurve& curve);

/// Execution time of a stage running alone on `sms` SMs.
Millis exec_time(const Stage& stage, const SpeedupCurve& curve, double sms);

/// Named curves shared by a scenario.
class CurveSet {
public:
    void add(SpeedupCurve curve);
    bool contains(const std::string& id) const { return curves_.count(id) != 0; }
    const SpeedupCurve& at(const std::string& id) const;
    const std::map<std::string, SpeedupCurve>& all() const { return curves_; }

    bool operator==(const CurveSet&) const = default;

private:
    std::map<std::string, SpeedupCurve> curves_;
};

/// Parameters of the default per-operation curves (gain at 68 SMs).
struct DefaultGains {
    double conv = 32.0;
    double maxpool = 14.0;
    double other = 7.0;
    double network = 23.0;
    std::uint32_t sms = 68;
};

/// conv, maxpool, other (Amdahl fits) and resnet18 (conv + other composed to hit the network gain).
CurveSet default_curves(const DefaultGains& gains = {});

}  // namespace sgprs
