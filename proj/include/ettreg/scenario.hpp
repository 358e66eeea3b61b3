#ifndef ETTREG_SCENARIO_HPP
#define ETTREG_SCENARIO_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "ettreg/policy.hpp"

namespace ettreg {

struct CollisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind {
    SingleLane,
    MultilaneCritical,
    MultilaneNonCritical,
    SyntheticLinear,
};

/// Intelligent Driver Model parameters. The target gap is d0 + v * T.
struct IdmParams {
    double d0 = 2.7;          // jam distance, m
    double t_headway = 2.0;   // s
    double a_max = 2.5;       // m/s^2
    double a_min = -5.0;      // m/s^2
    double b_comf = 4.1;      // comfortable deceleration, m/s^2
    double v0 = 70.0;         // desired free speed, m/s
    double exponent = 4.0;
};

/// Car-following acceleration, clamped to [a_min, a_max]. dv is the closing
/// speed v - v_lead, s the bumper gap.
inline double idm_accel(double v, double dv, double s, const IdmParams& p) {
    if (s <= 0.0) {
        throw CollisionError("gap closed to " + std::to_string(s) + " m");
    }
    const double s_star =
        p.d0 + std::max(0.0, v * p.t_headway +
                                 v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    const double a = p.a_max * (1.0 - std::pow(v / p.v0, p.exponent) -
                                (s_star / s) * (s_star / s));
    return std::clamp(a, p.a_min, p.a_max);
}

struct LeadSegment {
    double duration;  // s
    double accel;     // m/s^2
};

/// Piecewise-constant lead acceleration; zero after the last segment.
inline double lead_profile(double t, const std::vector<LeadSegment>& schedule) {
    if (t < 0.0) throw std::invalid_argument("negative time");
    double start = 0.0;
    for (const LeadSegment& seg : schedule) {
        if (t < start + seg.duration) return seg.accel;
        start += seg.duration;
    }
    return 0.0;
}

struct MultilaneParams {
    double v_fast = 33.0;       // fast-lane constant speed, m/s
    double gap_fast = 250.0;    // spacing between fast-lane vehicles, m
    int n_fast = 3;
    double first_fast_ahead = 110.0; // first fast vehicle this far ahead
    double commit_own = 1.0;    // change lanes when own-lane margin falls below
    double commit_other = 1.0;  // ... and fast-lane margin exceeds this
};

struct SyntheticParams {
    Eigen::Matrix2d A{{0.995, 0.03}, {-0.03, 0.99}};
    Eigen::Vector2d x0{4.0, 2.0};
    double noise_sigma = 0.06;  // per-state process noise scale
    double noise_bound = 0.12;  // hard truncation, the bound fed to prediction
};

struct VehicleState {
    double position = 0.0;  // m
    double speed = 0.0;     // m/s
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::SingleLane;
    double ts = 0.01;       // s
    double duration = 35.0; // s
    Eigen::Matrix2d q_acc{{2.5e-9, 5.0e-7}, {5.0e-7, 1.0e-4}};
    double q_other_scale = 10.0;
    std::map<std::string, double> r;  // per-sensor measurement noise variance
    IdmParams idm;
    double d_phi = 0.0;               // property gap offset, below idm.d0
    std::vector<LeadSegment> lead_schedule{{20.0, 0.0}, {5.0, -5.0}, {10.0, 2.5}};
    double initial_speed = 30.0;      // m/s for every vehicle
    double initial_gap_extra = 20.0;  // spawn gap beyond the steady-state target
    double wind_bias = 0.05;          // unmodeled extra acceleration, m/s^2
    double z_sigma = 3.0;             // confidence inflation for prediction
    double sensor_range = 500.0;      // distance sensors saturate here, m
    MultilaneParams multilane;
    SyntheticParams synthetic;
    std::vector<std::string> properties;  // property texts; empty = defaults
    PolicyConfig policy;
    bool record_trace = false;

    int steps() const {
        const double n = duration / ts;
        const long rounded = std::lround(n);
        if (rounded <= 0 || std::abs(n - static_cast<double>(rounded)) > 1e-9) {
            throw ConfigError("duration must be an integral number of steps");
        }
        return static_cast<int>(rounded);
    }

    void validate() const {
        if (ts <= 0.0) throw ConfigError("ts must be positive");
        if (!(d_phi < idm.d0)) throw ConfigError("d_phi must stay below idm.d0");
        steps();
    }
};

namespace detail {

inline std::string format_coeff(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace detail

/// Safe-distance property over the own-lane gap: x_delta > d_phi + T * v.
inline std::string single_lane_property(double d_phi, double t_headway,
                                        double rho_max = 60.0) {
    return "x_delta - " + detail::format_coeff(t_headway) + "*v > " +
           detail::format_coeff(d_phi) + " @rhomax(" +
           detail::format_coeff(rho_max) +
           ") @signals(x_delta, v)";
}

/// Overtaking property: safe in the own lane, or safe with respect to both
/// neighbours in the fast lane. The follower's speed v_f is estimated, not
/// measured, so it is absent from the signal bindings. Each atom carries a
/// maximum robustness matched to its signal range: the own-lane margin moves
/// within a few tens of metres while fast-lane gaps span hundreds.
inline std::string multilane_property(double d_phi, double t_headway,
                                      double rho_max_own = 25.0,
                                      double rho_max_fast = 150.0) {
    const std::string t = detail::format_coeff(t_headway);
    const std::string d = detail::format_coeff(d_phi);
    const std::string ro = detail::format_coeff(rho_max_own);
    const std::string rf = detail::format_coeff(rho_max_fast);
    return "(x_delta - " + t + "*v > " + d + " @rhomax(" + ro +
           ") @signals(x_delta, v))"
           " || ((x_delta_f - " + t + "*v_f > " + d + " @rhomax(" + rf +
           ") @signals(x_delta_f))"
           " && (x_delta_p - " + t + "*v > " + d + " @rhomax(" + rf +
           ") @signals(x_delta_p, v)))";
}

inline std::string synthetic_property() {
    return "x1 + 0.7*x2 > -2 @rhomax(8) @signals(x1, x2)";
}

inline std::vector<std::string> default_properties(const ScenarioConfig& config) {
    switch (config.kind) {
        case ScenarioKind::SingleLane:
            return {single_lane_property(config.d_phi, config.idm.t_headway)};
        case ScenarioKind::MultilaneCritical:
        case ScenarioKind::MultilaneNonCritical:
            return {multilane_property(config.d_phi, config.idm.t_headway)};
        case ScenarioKind::SyntheticLinear:
            return {synthetic_property()};
    }
    return {};
}

inline std::map<std::string, double> default_measurement_noise(
    const ScenarioConfig& config) {
    switch (config.kind) {
        case ScenarioKind::SingleLane:
            return {{"v", 0.02}, {"x_delta", 0.02}};
        case ScenarioKind::MultilaneCritical:
        case ScenarioKind::MultilaneNonCritical:
            return {{"v", 0.02},
                    {"x_delta", 0.02},
                    {"x_delta_p", 0.02},
                    {"x_delta_f", 0.02}};
        case ScenarioKind::SyntheticLinear:
            return {{"x1", 0.0}, {"x2", 0.0}};
    }
    return {};
}

inline ScenarioConfig default_config(ScenarioKind kind) {
    ScenarioConfig config;
    config.kind = kind;
    if (kind == ScenarioKind::MultilaneNonCritical) {
        config.multilane.gap_fast = 500.0;
        config.multilane.first_fast_ahead = 250.0;
        config.multilane.n_fast = 3;
    }
    if (kind == ScenarioKind::SyntheticLinear) {
        config.duration = 5.0;  // 500 steps at the default ts
        config.wind_bias = 0.0;
        config.z_sigma = 0.0;
    }
    config.r = default_measurement_noise(config);
    config.properties = default_properties(config);
    return config;
}

} // namespace ettreg

#endif
