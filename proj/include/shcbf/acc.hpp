#pragma once

// Adaptive cruise control benchmark: point-mass host vehicle behind a lead
// vehicle at constant speed, variable-time-headway barrier, and the scenario
// set used by the acceptance runs.
//
// State x = (position [m], speed [m/s], headway [m]); input u is the wheel
// force expressed in units of `input_unit` newtons.

#include "shcbf/simulator.hpp"

#include <string>
#include <utility>
#include <vector>

namespace shcbf::acc {

struct AccParams {
    double mass = 1650.0;          // kg
    double f0 = 0.1;               // N
    double f1 = 5.0;               // N s/m
    double f2 = 0.25;              // N s^2/m^2
    double lead_speed = 13.89;     // m/s
    double desired_speed = 24.0;   // m/s
    double nominal_decay = 0.5;    // 1/s
    double headway_coef = 1.8;     // s^2/m
    double input_unit = 100.0;     // N per unit of u

    /// Plain SI input (u in newtons).
    static AccParams si() {
        AccParams p;
        p.input_unit = 1.0;
        return p;
    }

    void validate() const {
        if (!(mass > 0.0)) throw ConfigError("plant: mass must be > 0");
        if (f0 < 0.0 || f1 < 0.0 || f2 < 0.0) throw ConfigError("plant: resistance coefficients must be >= 0");
        if (!(lead_speed > 0.0)) throw ConfigError("plant: lead_speed must be > 0");
        if (!(desired_speed > 0.0)) throw ConfigError("plant: desired_speed must be > 0");
        if (!(headway_coef > 0.0)) throw ConfigError("plant: headway_coef must be > 0");
        if (!(input_unit > 0.0)) throw ConfigError("plant: input_unit must be > 0");
    }

    bool operator==(const AccParams&) const = default;
};

inline double resistance(const AccParams& p, double speed) { return p.f0 + p.f1 * speed + p.f2 * speed * speed; }

struct AccVectorFields {
    Vector f;
    Vector g;
};

inline AccVectorFields acc_dynamics(const AccParams& p, const State& x) {
    AccVectorFields out{Vector(3), Vector(3)};
    out.f << x[1], -resistance(p, x[1]) / p.mass, p.lead_speed - x[1];
    out.g << 0.0, p.input_unit / p.mass, 0.0;
    return out;
}

/// u_des = -eps_bar (m/2)(x2 - v_d) + F_r, in input units.
inline double acc_nominal(const AccParams& p, const State& x) {
    return (-p.nominal_decay * 0.5 * p.mass * (x[1] - p.desired_speed) + resistance(p, x[1])) / p.input_unit;
}

inline double acc_barrier(const AccParams& p, const State& x) { return x[2] - p.headway_coef * x[1] * x[1]; }

inline RowVector acc_barrier_gradient(const AccParams& p, const State& x) {
    RowVector g(3);
    g << 0.0, -2.0 * p.headway_coef * x[1], 1.0;
    return g;
}

/// Closed-form Lie derivatives of the headway barrier.
inline LieDerivatives acc_barrier_lie(const AccParams& p, const State& x) {
    const double k = 2.0 * p.headway_coef;  // 3.6 for the standard coefficient
    LieDerivatives out;
    out.lfh = (p.lead_speed - x[1]) + k * x[1] * resistance(p, x[1]) / p.mass;
    out.lgh = RowVector::Constant(1, -k * x[1] * p.input_unit / p.mass);
    return out;
}

inline ControlAffineDynamics make_dynamics(const AccParams& p) {
    p.validate();
    return ControlAffineDynamics(
        3, 1, [p](const State& x) { return acc_dynamics(p, x).f; },
        [p](const State& x) -> Matrix { return acc_dynamics(p, x).g; });
}

inline BarrierFunction make_barrier(const AccParams& p) {
    return BarrierFunction([p](const State& x) { return acc_barrier(p, x); },
                           [p](const State& x) { return acc_barrier_gradient(p, x); });
}

inline NominalController make_nominal(const AccParams& p) {
    return [p](const State& x) { return Input::Constant(1, acc_nominal(p, x)); };
}

inline CbfQpFilter make_filter(const AccParams& p, const ClassKappa& alpha) {
    return CbfQpFilter{make_dynamics(p), make_barrier(p), alpha, make_nominal(p)};
}

/// Box covering every acceptance trajectory. Speeds stay at or above 1 m/s so
/// that L_g h is bounded away from zero on the sampled boundary.
inline OperatingRegion default_region() {
    OperatingRegion r;
    r.lower = Vector(3);
    r.upper = Vector(3);
    r.lower << 0.0, 1.0, 1.0;
    r.upper << 2000.0, 30.0, 1700.0;
    return r;
}

inline State default_initial_state() {
    State x(3);
    x << 0.0, 20.0, 900.0;
    return x;
}

/// Plain data describing one ACC run; serialisable and comparable.
struct AccScenario {
    std::string name = "acc";
    AccParams params;
    ControllerKind controller = ControllerKind::tunable;
    TunableControllerConfig tuning;
    double alpha_slope = 1.0;
    State initial_state = default_initial_state();
    IntegratorConfig integrator;
    HoldSchedule schedule;
    OperatingRegion region = default_region();

    Scenario build() const {
        params.validate();
        Scenario sc{name,       make_filter(params, ClassKappa::linear(alpha_slope)),
                    controller, tuning,
                    initial_state, integrator,
                    schedule,   region};
        return sc;
    }

    bool operator==(const AccScenario& o) const {
        return name == o.name && params == o.params && controller == o.controller && tuning == o.tuning &&
               alpha_slope == o.alpha_slope && initial_state == o.initial_state && integrator == o.integrator &&
               schedule == o.schedule && region == o.region;
    }
};

/// Tuning from the benchmark: c = 9.18, delta = 0.0005, eps = 1, with band 10 delta,
/// sharpness 200/band and d = 0.004 (< c alpha(delta) = 0.00459).
inline TunableControllerConfig benchmark_tuning() {
    TunableControllerConfig t;
    t.c = 9.18;
    t.delta = 0.0005;
    t.band = 10.0 * t.delta;
    t.epsilon = 1.0;
    t.sharpness = SigmoidGain::default_sharpness(t.band);
    t.margin = 0.004;
    return t;
}

inline const std::vector<double>& sweep_frequencies() {
    static const std::vector<double> f{0.5, 1.0, 2.0, 5.0, 10.0};
    return f;
}

inline AccScenario base_scenario() {
    AccScenario s;
    s.tuning = benchmark_tuning();
    return s;
}

inline std::string frequency_label(double hz) {
    std::ostringstream os;
    os << hz << "Hz";
    return os.str();
}

/// F1: plain k periodic sweep; F2: k_T sweep; F2b: k_T at 2.5 Hz; F3: k_T event-triggered.
inline std::vector<AccScenario> acc_scenarios() {
    std::vector<AccScenario> out;
    for (double hz : sweep_frequencies()) {
        AccScenario s = base_scenario();
        s.name = "F1-" + frequency_label(hz);
        s.controller = ControllerKind::plain;
        s.schedule = HoldSchedule::periodic(1.0 / hz);
        out.push_back(s);
    }
    for (double hz : sweep_frequencies()) {
        AccScenario s = base_scenario();
        s.name = "F2-" + frequency_label(hz);
        s.controller = ControllerKind::tunable;
        s.schedule = HoldSchedule::periodic(1.0 / hz);
        out.push_back(s);
    }
    {
        AccScenario s = base_scenario();
        s.name = "F2b-2.5Hz";
        s.controller = ControllerKind::tunable;
        s.schedule = HoldSchedule::periodic(1.0 / 2.5);
        out.push_back(s);
    }
    {
        AccScenario s = base_scenario();
        s.name = "F3-event";
        s.controller = ControllerKind::tunable;
        s.schedule = HoldSchedule::event_triggered(0.0);
        s.integrator.substep = 1.25e-4;
        out.push_back(s);
    }
    return out;
}

}  // namespace shcbf::acc
