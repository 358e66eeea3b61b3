#ifndef ETTREG_CONFIG_JSON_HPP
#define ETTREG_CONFIG_JSON_HPP

#include <json.hpp>

#include "ettreg/scenario.hpp"

namespace ettreg {

using json = nlohmann::json;

inline ScenarioKind scenario_kind_from_name(const std::string& name) {
    if (name == "single_lane") return ScenarioKind::SingleLane;
    if (name == "multilane_critical") return ScenarioKind::MultilaneCritical;
    if (name == "multilane_noncritical") return ScenarioKind::MultilaneNonCritical;
    if (name == "synthetic_linear") return ScenarioKind::SyntheticLinear;
    throw ConfigError("unknown scenario kind: " + name);
}

inline std::string scenario_kind_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::SingleLane: return "single_lane";
        case ScenarioKind::MultilaneCritical: return "multilane_critical";
        case ScenarioKind::MultilaneNonCritical: return "multilane_noncritical";
        case ScenarioKind::SyntheticLinear: return "synthetic_linear";
    }
    return "single_lane";
}

inline PolicyKind policy_kind_from_name(const std::string& name) {
    if (name == "tt") return PolicyKind::TimeTriggered;
    if (name == "cett") return PolicyKind::ConstantEtt;
    if (name == "rho_ett") return PolicyKind::RhoEtt;
    if (name == "rho_ett_wc") return PolicyKind::RhoEttWc;
    throw ConfigError("unknown policy kind: " + name);
}

inline std::string policy_kind_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::TimeTriggered: return "tt";
        case PolicyKind::ConstantEtt: return "cett";
        case PolicyKind::RhoEtt: return "rho_ett";
        case PolicyKind::RhoEttWc: return "rho_ett_wc";
    }
    return "tt";
}

namespace detail {

inline std::map<std::string, double> string_double_map(const json& j) {
    std::map<std::string, double> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        out[it.key()] = it.value().get<double>();
    }
    return out;
}

inline Eigen::Matrix2d matrix2_from_json(const json& j) {
    Eigen::Matrix2d m;
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k < 2; ++k) {
            m(i, k) = j.at(i).at(k).get<double>();
        }
    }
    return m;
}

inline json matrix2_to_json(const Eigen::Matrix2d& m) {
    return json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
}

} // namespace detail

inline PolicyConfig policy_from_json(const json& j) {
    PolicyConfig p;
    p.kind = policy_kind_from_name(j.value("kind", "tt"));
    if (j.contains("constant_delta")) {
        p.constant_delta = detail::string_double_map(j.at("constant_delta"));
    }
    if (j.contains("properties")) {
        for (const json& jp : j.at("properties")) {
            PropertyParams params;
            for (const json& ja : jp.at("atoms")) {
                AtomParams atom;
                if (ja.contains("eps")) {
                    atom.eps = detail::string_double_map(ja.at("eps"));
                }
                if (ja.contains("lambdas")) {
                    atom.lambdas = detail::string_double_map(ja.at("lambdas"));
                }
                atom.eps_rho = ja.value("eps_rho", 1.0);
                params.atoms.push_back(std::move(atom));
            }
            p.properties.push_back(std::move(params));
        }
    }
    p.eta = j.value("eta", 0.0);
    p.or_as_and = j.value("or_as_and", false);
    return p;
}

inline json policy_to_json(const PolicyConfig& p) {
    json j;
    j["kind"] = policy_kind_name(p.kind);
    if (!p.constant_delta.empty()) j["constant_delta"] = p.constant_delta;
    if (!p.properties.empty()) {
        json jprops = json::array();
        for (const PropertyParams& params : p.properties) {
            json jatoms = json::array();
            for (const AtomParams& atom : params.atoms) {
                json ja = json::object();
                if (!atom.eps.empty()) ja["eps"] = atom.eps;
                if (!atom.lambdas.empty()) ja["lambdas"] = atom.lambdas;
                ja["eps_rho"] = atom.eps_rho;
                jatoms.push_back(std::move(ja));
            }
            jprops.push_back(json{{"atoms", std::move(jatoms)}});
        }
        j["properties"] = std::move(jprops);
    }
    j["eta"] = p.eta;
    j["or_as_and"] = p.or_as_and;
    return j;
}

/// Builds a scenario from JSON: fields start at the defaults of the named
/// scenario kind, so configs only need to state what differs.
inline ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig c = default_config(
        scenario_kind_from_name(j.value("scenario", "single_lane")));
    c.ts = j.value("ts", c.ts);
    c.duration = j.value("duration", c.duration);
    if (j.contains("q_acc")) c.q_acc = detail::matrix2_from_json(j.at("q_acc"));
    c.q_other_scale = j.value("q_other_scale", c.q_other_scale);
    if (j.contains("r")) c.r = detail::string_double_map(j.at("r"));
    if (j.contains("idm")) {
        const json& ji = j.at("idm");
        c.idm.d0 = ji.value("d0", c.idm.d0);
        c.idm.t_headway = ji.value("t_headway", c.idm.t_headway);
        c.idm.a_max = ji.value("a_max", c.idm.a_max);
        c.idm.a_min = ji.value("a_min", c.idm.a_min);
        c.idm.b_comf = ji.value("b_comf", c.idm.b_comf);
        c.idm.v0 = ji.value("v0", c.idm.v0);
        c.idm.exponent = ji.value("exponent", c.idm.exponent);
    }
    c.d_phi = j.value("d_phi", c.d_phi);
    if (j.contains("lead_schedule")) {
        c.lead_schedule.clear();
        for (const json& seg : j.at("lead_schedule")) {
            c.lead_schedule.push_back(
                {seg.at("duration").get<double>(), seg.at("accel").get<double>()});
        }
    }
    c.initial_speed = j.value("initial_speed", c.initial_speed);
    c.initial_gap_extra = j.value("initial_gap_extra", c.initial_gap_extra);
    c.wind_bias = j.value("wind_bias", c.wind_bias);
    c.z_sigma = j.value("z_sigma", c.z_sigma);
    c.sensor_range = j.value("sensor_range", c.sensor_range);
    if (j.contains("multilane")) {
        const json& jm = j.at("multilane");
        c.multilane.v_fast = jm.value("v_fast", c.multilane.v_fast);
        c.multilane.gap_fast = jm.value("gap_fast", c.multilane.gap_fast);
        c.multilane.n_fast = jm.value("n_fast", c.multilane.n_fast);
        c.multilane.first_fast_ahead =
            jm.value("first_fast_ahead", c.multilane.first_fast_ahead);
        c.multilane.commit_own = jm.value("commit_own", c.multilane.commit_own);
        c.multilane.commit_other =
            jm.value("commit_other", c.multilane.commit_other);
    }
    if (j.contains("synthetic")) {
        const json& js = j.at("synthetic");
        if (js.contains("A")) c.synthetic.A = detail::matrix2_from_json(js.at("A"));
        if (js.contains("x0")) {
            c.synthetic.x0[0] = js.at("x0").at(0).get<double>();
            c.synthetic.x0[1] = js.at("x0").at(1).get<double>();
        }
        c.synthetic.noise_sigma = js.value("noise_sigma", c.synthetic.noise_sigma);
        c.synthetic.noise_bound = js.value("noise_bound", c.synthetic.noise_bound);
    }
    if (j.contains("properties")) {
        c.properties = j.at("properties").get<std::vector<std::string>>();
    }
    if (j.contains("policy")) c.policy = policy_from_json(j.at("policy"));
    c.record_trace = j.value("record_trace", c.record_trace);
    c.validate();
    return c;
}

inline json scenario_to_json(const ScenarioConfig& c) {
    json j;
    j["scenario"] = scenario_kind_name(c.kind);
    j["ts"] = c.ts;
    j["duration"] = c.duration;
    j["q_acc"] = detail::matrix2_to_json(c.q_acc);
    j["q_other_scale"] = c.q_other_scale;
    j["r"] = c.r;
    j["idm"] = {{"d0", c.idm.d0},         {"t_headway", c.idm.t_headway},
                {"a_max", c.idm.a_max},   {"a_min", c.idm.a_min},
                {"b_comf", c.idm.b_comf}, {"v0", c.idm.v0},
                {"exponent", c.idm.exponent}};
    j["d_phi"] = c.d_phi;
    json sched = json::array();
    for (const LeadSegment& seg : c.lead_schedule) {
        sched.push_back({{"duration", seg.duration}, {"accel", seg.accel}});
    }
    j["lead_schedule"] = std::move(sched);
    j["initial_speed"] = c.initial_speed;
    j["initial_gap_extra"] = c.initial_gap_extra;
    j["wind_bias"] = c.wind_bias;
    j["z_sigma"] = c.z_sigma;
    j["sensor_range"] = c.sensor_range;
    j["multilane"] = {{"v_fast", c.multilane.v_fast},
                      {"gap_fast", c.multilane.gap_fast},
                      {"n_fast", c.multilane.n_fast},
                      {"first_fast_ahead", c.multilane.first_fast_ahead},
                      {"commit_own", c.multilane.commit_own},
                      {"commit_other", c.multilane.commit_other}};
    j["synthetic"] = {{"A", detail::matrix2_to_json(c.synthetic.A)},
                      {"x0", {c.synthetic.x0[0], c.synthetic.x0[1]}},
                      {"noise_sigma", c.synthetic.noise_sigma},
                      {"noise_bound", c.synthetic.noise_bound}};
    j["properties"] = c.properties;
    j["policy"] = policy_to_json(c.policy);
    j["record_trace"] = c.record_trace;
    return j;
}

} // namespace ettreg

#endif
