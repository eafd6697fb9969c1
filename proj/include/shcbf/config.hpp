#pragma once

// Run configuration: a JSON document with sections scenario, tuning, sim,
// region, output and an optional bounds section. Unknown keys are rejected
// and missing or invalid fields are reported by their full path.

#include "shcbf/acc.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace shcbf {

using json = nlohmann::json;

struct OutputConfig {
    std::string trace;
    std::string summary;
    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    acc::AccScenario scenario;
    std::optional<BoundSet> bounds;  // supplied constants skip estimation
    OutputConfig output;
};

namespace config_detail {

inline void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
    }
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(path + "." + key + ": missing required key");
    return *it;
}

inline double number(const json& obj, const std::string& key, const std::string& path, double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw ConfigError(path + "." + key + ": expected a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw ConfigError(path + "." + key + ": must be finite");
    return v;
}

inline void check(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path + ": " + what);
}

inline Vector vector_of(const json& v, const std::string& path, Eigen::Index n) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != n) {
        throw ConfigError(path + ": expected an array of " + std::to_string(n) + " numbers");
    }
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
        out[i] = v[i].get<double>();
    }
    return out;
}

inline json array_of(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline ControllerKind controller_of(const json& v, const std::string& path) {
    static const std::map<std::string, ControllerKind> kinds{{"plain", ControllerKind::plain},
                                                             {"adjusted", ControllerKind::adjusted},
                                                             {"tunable", ControllerKind::tunable},
                                                             {"nominal", ControllerKind::nominal}};
    if (!v.is_string() || !kinds.count(v.get<std::string>())) {
        throw ConfigError(path + ": expected one of plain, adjusted, tunable, nominal");
    }
    return kinds.at(v.get<std::string>());
}

}  // namespace config_detail

inline RunConfig parse_config(const json& doc) {
    using namespace config_detail;
    reject_unknown(doc, "", {"scenario", "tuning", "sim", "region", "output", "bounds"});
    RunConfig cfg;
    acc::AccScenario& s = cfg.scenario;
    s = acc::base_scenario();

    // scenario
    const json& sj = require(doc, "scenario", "config");
    reject_unknown(sj, "scenario", {"name", "label", "controller", "initial_state", "plant"});
    const json& name = require(sj, "name", "scenario");
    check(name.is_string() && name.get<std::string>() == "acc", "scenario.name", "only the 'acc' plant is available");
    s.name = sj.value("label", std::string("acc"));
    s.controller = controller_of(require(sj, "controller", "scenario"), "scenario.controller");
    if (sj.contains("plant")) {
        const json& pj = sj.at("plant");
        reject_unknown(pj, "scenario.plant",
                       {"mass", "f0", "f1", "f2", "lead_speed", "desired_speed", "nominal_decay", "headway_coef",
                        "input_unit"});
        auto& p = s.params;
        const std::string pp = "scenario.plant";
        p.mass = number(pj, "mass", pp, p.mass);
        p.f0 = number(pj, "f0", pp, p.f0);
        p.f1 = number(pj, "f1", pp, p.f1);
        p.f2 = number(pj, "f2", pp, p.f2);
        p.lead_speed = number(pj, "lead_speed", pp, p.lead_speed);
        p.desired_speed = number(pj, "desired_speed", pp, p.desired_speed);
        p.nominal_decay = number(pj, "nominal_decay", pp, p.nominal_decay);
        p.headway_coef = number(pj, "headway_coef", pp, p.headway_coef);
        p.input_unit = number(pj, "input_unit", pp, p.input_unit);
        check(p.mass > 0, pp + ".mass", "must be > 0");
        check(p.f0 >= 0, pp + ".f0", "must be >= 0");
        check(p.f1 >= 0, pp + ".f1", "must be >= 0");
        check(p.f2 >= 0, pp + ".f2", "must be >= 0");
        check(p.lead_speed > 0, pp + ".lead_speed", "must be > 0");
        check(p.desired_speed > 0, pp + ".desired_speed", "must be > 0");
        check(p.headway_coef > 0, pp + ".headway_coef", "must be > 0");
        check(p.input_unit > 0, pp + ".input_unit", "must be > 0");
    }
    if (sj.contains("initial_state")) s.initial_state = vector_of(sj.at("initial_state"), "scenario.initial_state", 3);

    // tuning
    if (doc.contains("tuning")) {
        const json& tj = doc.at("tuning");
        const std::string tp = "tuning";
        reject_unknown(tj, tp, {"c", "delta", "Delta", "epsilon", "s", "d", "alpha_slope"});
        auto& t = s.tuning;
        t.c = number(tj, "c", tp, t.c);
        t.delta = number(tj, "delta", tp, t.delta);
        t.band = number(tj, "Delta", tp, t.band);
        t.epsilon = number(tj, "epsilon", tp, t.epsilon);
        t.sharpness = tj.contains("s") ? number(tj, "s", tp, 0.0) : SigmoidGain::default_sharpness(t.band);
        t.margin = number(tj, "d", tp, t.margin);
        s.alpha_slope = number(tj, "alpha_slope", tp, s.alpha_slope);
        check(t.c > 0, "tuning.c", "must be > 0");
        check(t.delta > 0, "tuning.delta", "must be > 0");
        check(t.band > 0, "tuning.Delta", "must be > 0");
        check(t.epsilon > 0, "tuning.epsilon", "must be > 0");
        check(t.sharpness > 0, "tuning.s", "must be > 0");
        check(t.margin > 0, "tuning.d", "must be > 0");
        check(s.alpha_slope > 0, "tuning.alpha_slope", "must be > 0");
    }

    // sim
    const json& mj = require(doc, "sim", "config");
    reject_unknown(mj, "sim", {"horizon", "substep", "mode", "period", "event_floor"});
    s.integrator.horizon = number(mj, "horizon", "sim", s.integrator.horizon);
    s.integrator.substep = number(mj, "substep", "sim", s.integrator.substep);
    check(s.integrator.horizon > 0, "sim.horizon", "must be > 0");
    check(s.integrator.substep > 0, "sim.substep", "must be > 0");
    const json& mode = require(mj, "mode", "sim");
    const std::string mode_s = mode.is_string() ? mode.get<std::string>() : "";
    if (mode_s == "continuous") {
        s.schedule = HoldSchedule::continuous();
    } else if (mode_s == "periodic") {
        const double period = number(mj, "period", "sim", std::numeric_limits<double>::quiet_NaN());
        check(!std::isnan(period), "sim.period", "missing required key (periodic mode)");
        check(period >= s.integrator.substep, "sim.period", "must be >= sim.substep");
        s.schedule = HoldSchedule::periodic(period);
    } else if (mode_s == "event") {
        const double floor = number(mj, "event_floor", "sim", 0.0);
        check(floor >= 0, "sim.event_floor", "must be >= 0");
        s.schedule = HoldSchedule::event_triggered(floor);
    } else {
        throw ConfigError("sim.mode: expected one of continuous, periodic, event");
    }

    // region
    if (doc.contains("region")) {
        const json& rj = doc.at("region");
        reject_unknown(rj, "region", {"lower", "upper", "sample_count", "grid_per_axis", "seed", "safety_factor"});
        auto& r = s.region;
        if (rj.contains("lower")) r.lower = vector_of(rj.at("lower"), "region.lower", 3);
        if (rj.contains("upper")) r.upper = vector_of(rj.at("upper"), "region.upper", 3);
        r.sample_count = static_cast<int>(number(rj, "sample_count", "region", r.sample_count));
        r.grid_per_axis = static_cast<int>(number(rj, "grid_per_axis", "region", r.grid_per_axis));
        if (rj.contains("seed")) {
            check(rj.at("seed").is_number_unsigned() || rj.at("seed").is_number_integer(), "region.seed",
                  "expected a non-negative integer");
            r.seed = rj.at("seed").get<std::uint64_t>();
        }
        r.safety_factor = number(rj, "safety_factor", "region", r.safety_factor);
        for (int i = 0; i < 3; ++i) check(r.lower[i] < r.upper[i], "region.lower", "must be < region.upper");
        check(r.sample_count > 0, "region.sample_count", "must be > 0");
        check(r.grid_per_axis >= 2, "region.grid_per_axis", "must be >= 2");
        check(r.safety_factor >= 1, "region.safety_factor", "must be >= 1");
    }

    // output
    if (doc.contains("output")) {
        const json& oj = doc.at("output");
        reject_unknown(oj, "output", {"trace", "summary"});
        cfg.output.trace = oj.value("trace", std::string());
        cfg.output.summary = oj.value("summary", std::string());
    }

    // bounds
    if (doc.contains("bounds")) {
        const json& bj = doc.at("bounds");
        const std::string bp = "bounds";
        reject_unknown(bj, bp, {"b_f", "b_g", "b_k", "lambda", "mu", "m_lip", "l_k", "l_sigma", "safety_factor"});
        BoundSet b;
        for (const char* k : {"b_f", "b_g", "b_k", "lambda", "mu", "m_lip", "l_k", "l_sigma"}) (void)require(bj, k, bp);
        b.b_f = number(bj, "b_f", bp, 0);
        b.b_g = number(bj, "b_g", bp, 0);
        b.b_k = number(bj, "b_k", bp, 0);
        b.lambda = number(bj, "lambda", bp, 0);
        b.mu = number(bj, "mu", bp, 0);
        b.m_lip = number(bj, "m_lip", bp, 0);
        b.l_k = number(bj, "l_k", bp, 0);
        b.l_sigma = number(bj, "l_sigma", bp, 0);
        b.safety_factor = number(bj, "safety_factor", bp, 1.0);
        try {
            b.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("bounds: ") + e.what());
        }
        cfg.bounds = b;
    }
    return cfg;
}

inline json to_json(const acc::AccScenario& s) {
    using config_detail::array_of;
    json doc;
    const auto& p = s.params;
    doc["scenario"] = {{"name", "acc"},
                       {"label", s.name},
                       {"controller", to_string(s.controller)},
                       {"initial_state", array_of(s.initial_state)},
                       {"plant",
                        {{"mass", p.mass},
                         {"f0", p.f0},
                         {"f1", p.f1},
                         {"f2", p.f2},
                         {"lead_speed", p.lead_speed},
                         {"desired_speed", p.desired_speed},
                         {"nominal_decay", p.nominal_decay},
                         {"headway_coef", p.headway_coef},
                         {"input_unit", p.input_unit}}}};
    const auto& t = s.tuning;
    doc["tuning"] = {{"c", t.c},       {"delta", t.delta}, {"Delta", t.band},           {"epsilon", t.epsilon},
                     {"s", t.sharpness}, {"d", t.margin},    {"alpha_slope", s.alpha_slope}};
    json sim = {{"horizon", s.integrator.horizon}, {"substep", s.integrator.substep}, {"mode", to_string(s.schedule.mode)}};
    if (s.schedule.mode == HoldSchedule::Mode::periodic) sim["period"] = s.schedule.period;
    if (s.schedule.mode == HoldSchedule::Mode::event_triggered) sim["event_floor"] = s.schedule.event_floor;
    doc["sim"] = sim;
    const auto& r = s.region;
    doc["region"] = {{"lower", array_of(r.lower)},         {"upper", array_of(r.upper)},
                     {"sample_count", r.sample_count},     {"grid_per_axis", r.grid_per_axis},
                     {"seed", r.seed},                     {"safety_factor", r.safety_factor}};
    return doc;
}

inline json to_json(const RunConfig& cfg) {
    json doc = to_json(cfg.scenario);
    if (!cfg.output.trace.empty() || !cfg.output.summary.empty()) {
        doc["output"] = {{"trace", cfg.output.trace}, {"summary", cfg.output.summary}};
    }
    if (cfg.bounds) {
        const auto& b = *cfg.bounds;
        doc["bounds"] = {{"b_f", b.b_f},     {"b_g", b.b_g},     {"b_k", b.b_k}, {"lambda", b.lambda},
                         {"mu", b.mu},       {"m_lip", b.m_lip}, {"l_k", b.l_k}, {"l_sigma", b.l_sigma},
                         {"safety_factor", b.safety_factor}};
    }
    return doc;
}

/// Applies `section.key=value` (dotted path, any depth). The value is parsed as
/// JSON when possible and taken as a string otherwise.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected section.key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set: empty path component in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError("--set: '" + path + "' descends into a non-object");
            *node = json::object();
        }
        start = dot + 1;
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("parse error in '" + path + "': " + e.what());
    }
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    json doc = read_json_file(path);
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_config(doc);
}

}  // namespace shcbf
