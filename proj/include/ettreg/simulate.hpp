#ifndef ETTREG_SIMULATE_HPP
#define ETTREG_SIMULATE_HPP

#include <cstdio>
#include <limits>
#include <ostream>

#include "ettreg/estimator.hpp"
#include "ettreg/parser.hpp"
#include "ettreg/policy.hpp"
#include "ettreg/rng.hpp"
#include "ettreg/scenario.hpp"

namespace ettreg {

struct StepRecord {
    double t = 0.0;
    std::map<std::string, double> true_state;
    std::map<std::string, double> estimate;
    std::map<std::string, double> delta;     // thresholds in force this step
    std::map<std::string, int> triggered;
    double rho_hat = 0.0;
    double rho_true = 0.0;

    bool operator==(const StepRecord&) const = default;
};

struct SimResult {
    double rho_min_true = std::numeric_limits<double>::infinity();
    std::map<std::string, long> events;
    long total_events = 0;
    long steps = 0;
    long sign_violations = 0;  // steps where monitored and true sign disagree
    int lane_change_step = -1;
    std::vector<StepRecord> trace;

    bool operator==(const SimResult&) const = default;
};

/// One CSV row per step: t, true states, estimates, per-signal threshold and
/// trigger flag, monitored and true robustness.
inline void write_trace_csv(std::ostream& os, const SimResult& result) {
    if (result.trace.empty()) return;
    const StepRecord& head = result.trace.front();
    os << "t";
    for (const auto& [k, v] : head.true_state) (void)v, os << ",true_" << k;
    for (const auto& [k, v] : head.estimate) (void)v, os << ",est_" << k;
    for (const auto& [k, v] : head.delta) (void)v, os << ",delta_" << k;
    for (const auto& [k, v] : head.triggered) (void)v, os << ",trig_" << k;
    os << ",rho_hat,rho_true\n";
    char buf[32];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << ',' << buf;
    };
    for (const StepRecord& rec : result.trace) {
        std::snprintf(buf, sizeof(buf), "%.17g", rec.t);
        os << buf;
        for (const auto& [k, v] : rec.true_state) (void)k, num(v);
        for (const auto& [k, v] : rec.estimate) (void)k, num(v);
        for (const auto& [k, v] : rec.delta) (void)k, num(v);
        for (const auto& [k, v] : rec.triggered) (void)k, os << ',' << v;
        num(rec.rho_hat);
        num(rec.rho_true);
        os << '\n';
    }
}

namespace detail {

constexpr std::uint64_t kStreamProcess = 1;
constexpr std::uint64_t kStreamMeasure = 2;
constexpr std::uint64_t kStreamSynthetic = 3;

// Lower-triangular factor of a 2x2 PSD matrix, tolerating rank deficiency.
inline Eigen::Matrix2d chol2(const Eigen::Matrix2d& q) {
    Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
    l(0, 0) = std::sqrt(std::max(q(0, 0), 0.0));
    l(1, 0) = l(0, 0) > 0.0 ? q(1, 0) / l(0, 0) : 0.0;
    l(1, 1) = std::sqrt(std::max(q(1, 1) - l(1, 0) * l(1, 0), 0.0));
    return l;
}

struct Car {
    double x = 0.0;
    double v = 0.0;
};

struct Filter {
    LtiModel model;
    EstimatorState est;
    std::vector<std::string> names;  // state names, measured state first-class
    std::string sensor;              // measured output name
};

inline Filter make_gap_filter(double ts, const Eigen::Matrix2d& q, double r,
                              const std::string& sensor, double gap0,
                              double rate0) {
    Filter f;
    f.model.A = Eigen::MatrixXd{{1.0, ts}, {0.0, 1.0}};
    f.model.B = Eigen::MatrixXd::Zero(2, 1);  // unknown foreign control input
    f.model.C = Eigen::MatrixXd{{1.0, 0.0}};
    f.model.Q = q;
    f.model.R = Eigen::MatrixXd{{r}};
    f.model.ts = ts;
    f.est.xhat = Eigen::VectorXd{{gap0, rate0}};
    f.est.P = 0.01 * Eigen::MatrixXd::Identity(2, 2);
    f.names = {sensor, sensor + "_rate"};
    f.sensor = sensor;
    return f;
}

inline Filter make_self_filter(double ts, const Eigen::Matrix2d& q, double r,
                               double x0, double v0) {
    Filter f;
    f.model.A = Eigen::MatrixXd{{1.0, ts}, {0.0, 1.0}};
    f.model.B = Eigen::MatrixXd{{0.5 * ts * ts}, {ts}};
    f.model.C = Eigen::MatrixXd{{0.0, 1.0}};
    f.model.Q = q;
    f.model.R = Eigen::MatrixXd{{r}};
    f.model.ts = ts;
    f.est.xhat = Eigen::VectorXd{{x0, v0}};
    f.est.P = 0.01 * Eigen::MatrixXd::Identity(2, 2);
    f.names = {"x_own", "v"};
    f.sensor = "v";
    return f;
}

// Closed-loop vehicle-convoy simulation shared by the single-lane and
// multilane scenarios.
class AccSimulation {
public:
    AccSimulation(const ScenarioConfig& config, std::uint64_t seed)
        : config_(config),
          multilane_(config.kind != ScenarioKind::SingleLane),
          process_rng_(seed, kStreamProcess),
          measure_rng_(seed, kStreamMeasure) {
        config_.validate();
        if (config_.properties.empty()) {
            config_.properties = default_properties(config_);
        }
        for (const std::string& text : config_.properties) {
            properties_.push_back(parse_property(text));
            regulated_.push_back(config_.policy.or_as_and
                                     ? replace_or_with_and(properties_.back())
                                     : properties_.back());
        }
        init_world();
        init_filters();
        u_cmd_ = control_from_estimates();
        apply_policy();  // thresholds for the first step
    }

    SimResult run() {
        SimResult result;
        const int n = config_.steps();
        if (config_.record_trace) result.trace.reserve(n);
        for (int k = 1; k <= n; ++k) {
            step(k, result);
        }
        result.steps = n;
        for (const auto& [signal, channel] : channels_) {
            (void)signal;
            result.events[channel.signal] = channel.events;
            result.total_events += channel.events;
        }
        result.lane_change_step = lane_change_step_;
        return result;
    }

private:
    void init_world() {
        const double target = config_.idm.d0 +
                              config_.initial_speed * config_.idm.t_headway +
                              config_.initial_gap_extra;
        acc_ = {0.0, config_.initial_speed};
        lead_ = {target, config_.initial_speed};
        if (multilane_) {
            const MultilaneParams& ml = config_.multilane;
            for (int i = 0; i < ml.n_fast; ++i) {
                fast_.push_back(
                    {ml.first_fast_ahead - i * ml.gap_fast, ml.v_fast});
            }
        }
    }

    void init_filters() {
        const double ts = config_.ts;
        const Eigen::Matrix2d q_other = config_.q_other_scale * config_.q_acc;
        filters_.push_back(make_self_filter(ts, config_.q_acc, noise_r("v"),
                                            acc_.x, acc_.v));
        filters_.push_back(make_gap_filter(ts, q_other, noise_r("x_delta"),
                                           "x_delta", lead_.x - acc_.x, 0.0));
        if (multilane_) {
            filters_.push_back(make_gap_filter(ts, q_other, noise_r("x_delta_p"),
                                               "x_delta_p",
                                               true_gap("x_delta_p"), 0.0));
            filters_.push_back(make_gap_filter(ts, q_other, noise_r("x_delta_f"),
                                               "x_delta_f",
                                               true_gap("x_delta_f"), 0.0));
        }
        for (const Filter& f : filters_) {
            channels_[f.sensor] = SensorChannel{f.sensor, 0.0, -1, 0.0, 0};
        }
    }

    double noise_r(const std::string& sensor) const {
        auto it = config_.r.find(sensor);
        return it == config_.r.end() ? 0.01 : it->second;
    }

    // Nearest neighbours by lane, saturated at the sensor range. The fast
    // lane and the slow lane swap roles once the ACC vehicle changes lanes.
    const Car* nearest(bool own_lane, bool ahead) const {
        const bool fast_lane = own_lane == acc_in_fast_;
        const Car* best = nullptr;
        const auto consider = [&](const Car& c) {
            const double rel = c.x - acc_.x;
            if (ahead ? rel <= 0.0 : rel > 0.0) return;
            if (!best || (ahead ? c.x < best->x : c.x > best->x)) best = &c;
        };
        if (fast_lane) {
            for (const Car& c : fast_) consider(c);
        } else {
            consider(lead_);
        }
        return best;
    }

    double true_gap(const std::string& sensor) const {
        const Car* car = nullptr;
        if (sensor == "x_delta") {
            car = nearest(true, true);
        } else if (sensor == "x_delta_p") {
            car = nearest(false, true);
        } else if (sensor == "x_delta_f") {
            car = nearest(false, false);
        }
        if (!car) return config_.sensor_range;
        const double gap =
            sensor == "x_delta_f" ? acc_.x - car->x : car->x - acc_.x;
        return std::min(gap, config_.sensor_range);
    }

    double true_follower_speed() const {
        const Car* car = nearest(false, false);
        return car ? car->v : acc_.v;
    }

    void advance_truth(int k) {
        const double ts = config_.ts;
        const double t0 = (k - 1) * ts;

        const double a_lead = lead_profile(t0, config_.lead_schedule);
        lead_.x += lead_.v * ts + 0.5 * a_lead * ts * ts;
        lead_.v = std::max(lead_.v + a_lead * ts, 0.0);

        const double a_true = u_cmd_ + config_.wind_bias;
        const Eigen::Matrix2d l = chol2(config_.q_acc);
        const double n0 = process_rng_.normal(2 * k);
        const double n1 = process_rng_.normal(2 * k + 1);
        acc_.x += acc_.v * ts + 0.5 * a_true * ts * ts + l(0, 0) * n0;
        acc_.v = std::max(acc_.v + a_true * ts + l(1, 0) * n0 + l(1, 1) * n1, 0.0);

        // Fast-lane vehicles hold a constant speed unless a slower vehicle
        // blocks them, in which case they match its speed until clear.
        for (std::size_t i = 0; i < fast_.size(); ++i) {
            double ahead_x = std::numeric_limits<double>::infinity();
            double ahead_v = config_.multilane.v_fast;
            if (i > 0) {
                ahead_x = fast_[i - 1].x;
                ahead_v = fast_[i - 1].v;
            }
            if (acc_in_fast_ && acc_.x > fast_[i].x && acc_.x < ahead_x) {
                ahead_x = acc_.x;
                ahead_v = acc_.v;
            }
            const double gap = ahead_x - fast_[i].x;
            double v = config_.multilane.v_fast;
            if (gap < config_.idm.d0 + fast_[i].v) {
                v = std::min(ahead_v, v);
            }
            fast_[i].v = v;
            fast_[i].x += v * ts;
        }
    }

    StateVector monitor_truth() const {
        StateVector x{{"v", acc_.v}, {"x_delta", true_gap("x_delta")}};
        if (multilane_) {
            x["x_delta_p"] = true_gap("x_delta_p");
            x["x_delta_f"] = true_gap("x_delta_f");
            x["v_f"] = true_follower_speed();
        }
        return x;
    }

    StateVector monitor_estimates() const {
        StateVector x{{"v", filters_[0].est.xhat[1]},
                      {"x_delta", filters_[1].est.xhat[0]}};
        if (multilane_) {
            x["x_delta_p"] = filters_[2].est.xhat[0];
            x["x_delta_f"] = filters_[3].est.xhat[0];
            // gap rate of the follower sensor is v - v_follower
            x["v_f"] = filters_[0].est.xhat[1] - filters_[3].est.xhat[1];
        }
        return x;
    }

    double control_from_estimates() const {
        const double v = std::max(filters_[0].est.xhat[1], 0.0);
        const double s = std::max(filters_[1].est.xhat[0], 0.01);
        const double dv = -filters_[1].est.xhat[1];
        return idm_accel(v, dv, s, config_.idm);
    }

    void apply_policy() {
        const PolicyConfig& policy = config_.policy;
        EttAssignment assignment;
        switch (policy.kind) {
            case PolicyKind::TimeTriggered:
                for (auto& [signal, channel] : channels_) {
                    (void)signal;
                    channel.delta = 0.0;
                }
                return;
            case PolicyKind::ConstantEtt:
                assignment = cett(policy);
                break;
            case PolicyKind::RhoEtt: {
                const StateVector x = monitor_estimates();
                std::vector<EttAssignment> parts;
                for (std::size_t i = 0; i < regulated_.size(); ++i) {
                    parts.push_back(refine_arbitrary(regulated_[i], x,
                                                     property_params(i)));
                }
                assignment = combine_min(parts);
                break;
            }
            case PolicyKind::RhoEttWc: {
                const StateIntervalVector box = predicted_box();
                std::vector<EttAssignment> parts;
                for (std::size_t i = 0; i < regulated_.size(); ++i) {
                    parts.push_back(wc_refine_arbitrary(regulated_[i], box,
                                                        property_params(i)));
                }
                assignment = combine_min(parts);
                break;
            }
        }
        for (auto& [signal, channel] : channels_) {
            channel.delta = ett_of(assignment, signal);
        }
    }

    const PropertyParams& property_params(std::size_t i) const {
        if (i >= config_.policy.properties.size()) {
            throw ConfigError("no policy parameters for property " +
                              std::to_string(i));
        }
        return config_.policy.properties[i];
    }

    StateIntervalVector predicted_box() const {
        StateIntervalVector box;
        for (const Filter& f : filters_) {
            std::map<std::string, double> radius;
            const SensorChannel& channel = channels_.at(f.sensor);
            radius[f.sensor] =
                channel.last_trigger_step == step_ ? 0.0 : channel.delta;
            const Eigen::VectorXd u = f.sensor == "v"
                                          ? Eigen::VectorXd::Constant(1, u_cmd_)
                                          : Eigen::VectorXd::Zero(1);
            StateIntervalVector part = predict_state_interval(
                f.model, f.est, f.names, radius, u, config_.z_sigma);
            box.merge(part);
        }
        return box;
    }

    void maybe_change_lane() {
        if (!multilane_ || acc_in_fast_) return;
        if (properties_.empty() || properties_[0].kind() != Formula::Kind::Or) {
            return;
        }
        const StateVector x = monitor_estimates();
        const double rho_own = robustness(properties_[0].lhs(), x);
        const double rho_other = robustness(properties_[0].rhs(), x);
        if (rho_own < config_.multilane.commit_own &&
            rho_other > config_.multilane.commit_other) {
            acc_in_fast_ = true;
            lane_change_step_ = step_;
            // the fast-lane preceding vehicle becomes the own-lane leader
            std::swap(filters_[1].est, filters_[2].est);
            filters_[3].est.xhat = Eigen::VectorXd{{config_.sensor_range, 0.0}};
            filters_[3].est.P = Eigen::MatrixXd::Identity(2, 2);
        }
    }

    void step(int k, SimResult& result) {
        step_ = k;
        advance_truth(k);

        // sample, predict, trigger and update each filter
        const bool force = config_.policy.kind == PolicyKind::TimeTriggered;
        std::map<std::string, double> deltas_in_force;
        std::map<std::string, int> triggered;
        for (std::size_t i = 0; i < filters_.size(); ++i) {
            Filter& f = filters_[i];
            SensorChannel& channel = channels_[f.sensor];
            const double truth =
                f.sensor == "v" ? acc_.v : true_gap(f.sensor);
            const double noise_sigma = std::sqrt(noise_r(f.sensor));
            const double y =
                truth + noise_sigma * measure_rng_.normal(
                                          static_cast<std::uint64_t>(k) *
                                              filters_.size() +
                                          i);
            const Eigen::VectorXd u =
                f.sensor == "v" ? Eigen::VectorXd::Constant(1, u_cmd_)
                                : Eigen::VectorXd::Zero(1);
            const auto [xm, pm] = kf_predict(f.model, f.est, u);
            const double e = innovation_error((f.model.C * xm)(0), y);
            deltas_in_force[f.sensor] = channel.delta;
            const bool fire = force || trigger_check(e, channel.delta);
            if (fire) {
                channel.events += 1;
                channel.last_trigger_step = k;
                channel.last_sent = y;
            }
            triggered[f.sensor] = fire ? 1 : 0;
            f.est = kf_update(f.model, xm, pm, {fire},
                              Eigen::VectorXd::Constant(1, y),
                              Eigen::VectorXd::Constant(1, channel.delta));
        }

        // monitor, regulate, control
        const StateVector est = monitor_estimates();
        const StateVector truth = monitor_truth();
        double rho_hat = std::numeric_limits<double>::infinity();
        double rho_true = std::numeric_limits<double>::infinity();
        for (const Formula& phi : properties_) {
            rho_hat = std::min(rho_hat, robustness(phi, est));
            rho_true = std::min(rho_true, robustness(phi, truth));
        }
        result.rho_min_true = std::min(result.rho_min_true, rho_true);
        if ((rho_hat > 0.0) != (rho_true > 0.0)) result.sign_violations += 1;

        apply_policy();
        maybe_change_lane();

        if (true_gap("x_delta") <= 0.0) {
            throw CollisionError("own-lane gap closed at step " +
                                 std::to_string(k));
        }
        u_cmd_ = control_from_estimates();

        if (config_.record_trace) {
            StepRecord rec;
            rec.t = k * config_.ts;
            rec.true_state = truth;
            rec.estimate = est;
            rec.delta = deltas_in_force;
            rec.triggered = triggered;
            rec.rho_hat = rho_hat;
            rec.rho_true = rho_true;
            result.trace.push_back(std::move(rec));
        }
    }

    ScenarioConfig config_;
    bool multilane_ = false;
    CounterRng process_rng_;
    CounterRng measure_rng_;

    Car lead_, acc_;
    std::vector<Car> fast_;
    bool acc_in_fast_ = false;
    int lane_change_step_ = -1;
    double u_cmd_ = 0.0;
    int step_ = 0;

    std::vector<Filter> filters_;
    std::map<std::string, SensorChannel> channels_;
    std::vector<Formula> properties_;
    std::vector<Formula> regulated_;
};

// Two-state linear plant with exactly measurable states, bounded process
// noise and no measurement noise: the regime where the worst-case policy's
// sign-detection guarantee holds step for step.
class SyntheticSimulation {
public:
    SyntheticSimulation(const ScenarioConfig& config, std::uint64_t seed)
        : config_(config), rng_(seed, kStreamSynthetic) {
        config_.validate();
        if (config_.properties.empty()) {
            config_.properties = default_properties(config_);
        }
        for (const std::string& text : config_.properties) {
            properties_.push_back(parse_property(text));
            regulated_.push_back(config_.policy.or_as_and
                                     ? replace_or_with_and(properties_.back())
                                     : properties_.back());
        }
        x_ = config_.synthetic.x0;
        xhat_ = x_;
        for (int i = 0; i < 2; ++i) {
            channels_[name(i)] = SensorChannel{name(i), x_[i], -1, 0.0, 0};
            just_triggered_[i] = true;  // initial state is known exactly
        }
        apply_policy();
    }

    SimResult run() {
        SimResult result;
        const int n = config_.steps();
        if (config_.record_trace) result.trace.reserve(n);
        for (int k = 1; k <= n; ++k) {
            step(k, result);
        }
        result.steps = n;
        for (const auto& [signal, channel] : channels_) {
            (void)signal;
            result.events[channel.signal] = channel.events;
            result.total_events += channel.events;
        }
        return result;
    }

private:
    static std::string name(int i) { return i == 0 ? "x1" : "x2"; }

    StateVector as_map(const Eigen::Vector2d& v) const {
        return {{"x1", v[0]}, {"x2", v[1]}};
    }

    void apply_policy() {
        const PolicyConfig& policy = config_.policy;
        EttAssignment assignment;
        switch (policy.kind) {
            case PolicyKind::TimeTriggered:
                for (auto& [signal, channel] : channels_) {
                    (void)signal;
                    channel.delta = 0.0;
                }
                return;
            case PolicyKind::ConstantEtt:
                assignment = cett(policy);
                break;
            case PolicyKind::RhoEtt: {
                const StateVector x = as_map(xhat_);
                std::vector<EttAssignment> parts;
                for (std::size_t i = 0; i < regulated_.size(); ++i) {
                    parts.push_back(refine_arbitrary(
                        regulated_[i], x, config_.policy.properties.at(i)));
                }
                assignment = combine_min(parts);
                break;
            }
            case PolicyKind::RhoEttWc: {
                const StateIntervalVector box = predicted_box();
                std::vector<EttAssignment> parts;
                for (std::size_t i = 0; i < regulated_.size(); ++i) {
                    parts.push_back(wc_refine_arbitrary(
                        regulated_[i], box, config_.policy.properties.at(i)));
                }
                assignment = combine_min(parts);
                break;
            }
        }
        for (auto& [signal, channel] : channels_) {
            channel.delta = ett_of(assignment, signal);
        }
    }

    // A * (box around the estimate) plus the hard noise bound per state.
    StateIntervalVector predicted_box() const {
        const Eigen::Matrix2d& a = config_.synthetic.A;
        const double bound = config_.synthetic.noise_bound;
        Interval box[2];
        for (int i = 0; i < 2; ++i) {
            const double radius =
                just_triggered_[i] ? 0.0 : channels_.at(name(i)).delta;
            box[i] = make_interval(xhat_[i],
                                   std::isfinite(radius) ? radius : 0.0);
        }
        StateIntervalVector out;
        for (int i = 0; i < 2; ++i) {
            Interval acc = scale(a(i, 0), box[0]) + scale(a(i, 1), box[1]);
            out[name(i)] = acc + Interval(-bound, bound);
        }
        return out;
    }

    void step(int k, SimResult& result) {
        const Eigen::Matrix2d& a = config_.synthetic.A;
        Eigen::Vector2d w;
        for (int i = 0; i < 2; ++i) {
            w[i] = rng_.bounded_normal(2 * static_cast<std::uint64_t>(k) + i,
                                       config_.synthetic.noise_sigma,
                                       config_.synthetic.noise_bound);
        }
        x_ = a * x_ + w;

        const Eigen::Vector2d xhat_minus = a * xhat_;
        const bool force = config_.policy.kind == PolicyKind::TimeTriggered;
        std::map<std::string, double> deltas_in_force;
        std::map<std::string, int> triggered;
        for (int i = 0; i < 2; ++i) {
            SensorChannel& channel = channels_[name(i)];
            const double y = x_[i];  // exact sensors
            const double e = innovation_error(xhat_minus[i], y);
            deltas_in_force[name(i)] = channel.delta;
            const bool fire = force || trigger_check(e, channel.delta);
            if (fire) {
                channel.events += 1;
                channel.last_trigger_step = k;
                channel.last_sent = y;
                xhat_[i] = y;
            } else {
                xhat_[i] = xhat_minus[i];
            }
            just_triggered_[i] = fire;
            triggered[name(i)] = fire ? 1 : 0;
        }

        double rho_hat = std::numeric_limits<double>::infinity();
        double rho_true = std::numeric_limits<double>::infinity();
        for (const Formula& phi : properties_) {
            rho_hat = std::min(rho_hat, robustness(phi, as_map(xhat_)));
            rho_true = std::min(rho_true, robustness(phi, as_map(x_)));
        }
        result.rho_min_true = std::min(result.rho_min_true, rho_true);
        if ((rho_hat > 0.0) != (rho_true > 0.0)) result.sign_violations += 1;

        apply_policy();

        if (config_.record_trace) {
            StepRecord rec;
            rec.t = k * config_.ts;
            rec.true_state = as_map(x_);
            rec.estimate = as_map(xhat_);
            rec.delta = deltas_in_force;
            rec.triggered = triggered;
            rec.rho_hat = rho_hat;
            rec.rho_true = rho_true;
            result.trace.push_back(std::move(rec));
        }
    }

    ScenarioConfig config_;
    CounterRng rng_;
    Eigen::Vector2d x_;
    Eigen::Vector2d xhat_;
    bool just_triggered_[2] = {false, false};
    std::map<std::string, SensorChannel> channels_;
    std::vector<Formula> properties_;
    std::vector<Formula> regulated_;
};

} // namespace detail

/// Deterministic closed-loop run; identical (config, seed) pairs produce
/// identical results bit for bit.
inline SimResult run_simulation(const ScenarioConfig& config,
                                std::uint64_t seed) {
    if (config.kind == ScenarioKind::SyntheticLinear) {
        return detail::SyntheticSimulation(config, seed).run();
    }
    return detail::AccSimulation(config, seed).run();
}

} // namespace ettreg

#endif
