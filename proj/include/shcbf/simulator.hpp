#pragma once

// Sample-and-hold closed loop: fixed-step RK4 with the input held between
// sampling events, time-triggered and event-triggered schedulers, trace
// recording and post-run analysis.

#include "shcbf/cbf_core.hpp"
#include "shcbf/constants.hpp"
#include "shcbf/safety_filter.hpp"

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace shcbf {

struct IntegratorConfig {
    double substep = 1e-3;
    double horizon = 60.0;

    std::int64_t steps() const {
        if (!(substep > 0.0)) throw ConfigError("sim: substep must be > 0");
        if (!(horizon > 0.0)) throw ConfigError("sim: horizon must be > 0");
        const double q = horizon / substep;
        if (q > 9.0e15) throw ConfigError("sim: horizon/substep does not fit in an integer");
        return static_cast<std::int64_t>(std::llround(std::ceil(q - 1e-9)));
    }

    bool operator==(const IntegratorConfig&) const = default;
};

struct HoldSchedule {
    enum class Mode { continuous, periodic, event_triggered };
    Mode mode = Mode::periodic;
    double period = 0.5;       // periodic
    double event_floor = 0.0;  // event_triggered: minimum gap between events

    static HoldSchedule continuous() { return {Mode::continuous, 0.0, 0.0}; }
    static HoldSchedule periodic(double p) { return {Mode::periodic, p, 0.0}; }
    static HoldSchedule event_triggered(double floor = 0.0) { return {Mode::event_triggered, 0.0, floor}; }

    bool operator==(const HoldSchedule&) const = default;
};

enum class ControllerKind { plain, adjusted, tunable, nominal };

inline const char* to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::plain: return "plain";
        case ControllerKind::adjusted: return "adjusted";
        case ControllerKind::tunable: return "tunable";
        case ControllerKind::nominal: return "nominal";
    }
    return "?";
}

inline const char* to_string(HoldSchedule::Mode m) {
    switch (m) {
        case HoldSchedule::Mode::continuous: return "continuous";
        case HoldSchedule::Mode::periodic: return "periodic";
        case HoldSchedule::Mode::event_triggered: return "event";
    }
    return "?";
}

struct Scenario {
    std::string name;
    CbfQpFilter filter;  // dynamics, barrier, alpha, nominal
    ControllerKind controller = ControllerKind::tunable;
    TunableControllerConfig tuning;
    State initial_state;
    IntegratorConfig integrator;
    HoldSchedule schedule;
    OperatingRegion region;

    const ControlAffineDynamics& dynamics() const { return filter.dynamics; }
    const BarrierFunction& barrier() const { return filter.barrier; }
    const ClassKappa& alpha() const { return filter.alpha; }

    Input control(const State& x) const {
        switch (controller) {
            case ControllerKind::plain: return solve_cbf_qp(filter, x);
            case ControllerKind::adjusted: return adjusted_control(filter, tuning, x);
            case ControllerKind::tunable: return tunable_control(filter, tuning, x);
            case ControllerKind::nominal: return filter.nominal(x);
        }
        return filter.nominal(x);
    }

    Controller controller_fn() const {
        return [this](const State& x) { return control(x); };
    }

    void validate() const {
        const int n = filter.dynamics.state_dim();
        if (initial_state.size() != n) throw ConfigError("scenario: initial state has the wrong dimension");
        region.validate(n);
        tuning.validate();
        (void)integrator.steps();
        if (schedule.mode == HoldSchedule::Mode::periodic && !(schedule.period >= integrator.substep * (1 - 1e-9))) {
            throw ConfigError("sim: period must be >= substep");
        }
        if (schedule.event_floor < 0.0) throw ConfigError("sim: event floor must be >= 0");
        if (!(filter.barrier(initial_state) >= 0.0)) throw ConfigError("scenario: initial state is outside the safe set");
        if (!region.contains(initial_state)) throw ConfigError("scenario: initial state is outside the operating region");
    }
};

/// Classical RK4 step with the input held.
inline State rk4_step(const ControlAffineDynamics& dyn, const State& x, const Input& u, double dt) {
    const Vector k1 = dyn.velocity(x, u);
    const Vector k2 = dyn.velocity(x + 0.5 * dt * k1, u);
    const Vector k3 = dyn.velocity(x + 0.5 * dt * k2, u);
    const Vector k4 = dyn.velocity(x + dt * k3, u);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// States at every substep boundary of [0, duration], x0 first.
inline std::vector<State> integrate_held(const ControlAffineDynamics& dyn, const State& x0, const Input& u,
                                         double duration, double substep) {
    if (!(substep > 0.0) || duration < 0.0) throw ConfigError("integrate: substep must be > 0, duration >= 0");
    const double q = duration / substep;
    const auto steps = static_cast<std::int64_t>(std::llround(q));
    if (std::abs(q - static_cast<double>(steps)) > 1e-9 * std::max(1.0, q)) {
        throw ConfigError("integrate: duration must be an integer multiple of the substep");
    }
    std::vector<State> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(x0);
    State x = x0;
    for (std::int64_t k = 0; k < steps; ++k) {
        State next = rk4_step(dyn, x, u, substep);
        if (!next.allFinite()) {
            throw DivergenceError("integration diverged at t=" + std::to_string((k + 1) * substep), k * substep, x);
        }
        x = std::move(next);
        out.push_back(x);
    }
    return out;
}

/// T = L_f h + L_g h u_held + (1 + c) alpha(h), evaluated with the held input.
inline double trigger_value(const Scenario& sc, const State& x, const Input& u_held) {
    const auto lie = lie_derivatives(sc.dynamics(), sc.barrier(), x);
    return lie.lfh + lie.lgh.dot(u_held) + amplified_alpha(sc.alpha(), sc.tuning.c, sc.barrier()(x));
}

/// One row per substep, stored column-wise.
struct Trace {
    int n = 0;
    int m = 0;
    std::vector<double> t;
    std::vector<double> x;  // n per row
    std::vector<double> u;  // m per row, the input held over [t, t + substep)
    std::vector<double> h;
    std::vector<double> hdot;
    std::vector<double> trigger;
    std::vector<std::uint8_t> event;
    std::vector<double> events;             // sample instants
    std::vector<std::size_t> event_rows;    // row index of each sample
    double substep = 0.0;

    /// Time between two rows, as a whole number of substeps.
    double span(std::size_t from, std::size_t to) const {
        const double dt = substep > 0.0 ? substep : (rows() > 1 ? t[1] - t[0] : 0.0);
        return static_cast<double>(to - from) * dt;
    }

    std::size_t rows() const { return t.size(); }
    Eigen::Map<const Vector> state(std::size_t r) const { return {x.data() + r * n, n}; }
    Eigen::Map<const Vector> input(std::size_t r) const { return {u.data() + r * m, m}; }

    void reserve(std::size_t rows) {
        t.reserve(rows);
        x.reserve(rows * n);
        u.reserve(rows * m);
        h.reserve(rows);
        hdot.reserve(rows);
        trigger.reserve(rows);
        event.reserve(rows);
    }

    void push(double time, const State& xs, const Input& us, double hv, double hd, double tr, bool ev) {
        t.push_back(time);
        x.insert(x.end(), xs.data(), xs.data() + n);
        u.insert(u.end(), us.data(), us.data() + m);
        h.push_back(hv);
        hdot.push_back(hd);
        trigger.push_back(tr);
        event.push_back(ev ? 1 : 0);
        if (ev) {
            events.push_back(time);
            event_rows.push_back(t.size() - 1);
        }
    }
};

/// Runs the closed loop. Events: periodic every `period` (on the first substep at
/// or after each multiple), event-triggered whenever the trigger value with the
/// held input is <= 0 and the floor has elapsed, continuous at every substep.
inline Trace run(const Scenario& sc) {
    sc.validate();
    const auto& dyn = sc.dynamics();
    const auto& hfun = sc.barrier();
    const double dt = sc.integrator.substep;
    const std::int64_t steps = sc.integrator.steps();

    Trace tr;
    tr.n = dyn.state_dim();
    tr.substep = dt;
    tr.m = dyn.input_dim();
    tr.reserve(static_cast<std::size_t>(steps) + 1);

    auto sample = [&](const State& x, double t) {
        try {
            Input u = sc.control(x);
            if (!u.allFinite()) throw DivergenceError("controller returned a non-finite input", t, x);
            return u;
        } catch (const InfeasibleError& e) {
            throw InfeasibleError(std::string(e.what()) + " (t=" + std::to_string(t) + ")", x);
        }
    };
    auto record = [&](double t, const State& x, const Input& u, bool ev) {
        const auto lie = lie_derivatives(dyn, hfun, x);
        const double hv = hfun(x);
        const double hd = lie.lfh + lie.lgh.dot(u);
        const double trig = hd + amplified_alpha(sc.alpha(), sc.tuning.c, hv);
        tr.push(t, x, u, hv, hd, trig, ev);
        return trig;
    };

    State x = sc.initial_state;
    Input u = sample(x, 0.0);
    record(0.0, x, u, true);
    double last_event = 0.0;
    std::int64_t next_periodic = 1;
    auto periodic_step = [&](std::int64_t k) {
        return static_cast<std::int64_t>(std::ceil(static_cast<double>(k) * sc.schedule.period / dt - 1e-9));
    };
    std::int64_t next_periodic_step = sc.schedule.mode == HoldSchedule::Mode::periodic ? periodic_step(1) : 0;

    for (std::int64_t j = 1; j <= steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        State next = rk4_step(dyn, x, u, dt);
        if (!next.allFinite()) throw DivergenceError("state diverged at t=" + std::to_string(t), t - dt, x);
        x = std::move(next);
        if (!sc.region.contains(x, 1e-9)) {
            throw RegionExitError("state left the operating region at t=" + std::to_string(t) + ": " +
                                      format_vector(x),
                                  t, x);
        }
        bool ev = false;
        if (j < steps) switch (sc.schedule.mode) {
            case HoldSchedule::Mode::continuous: ev = true; break;
            case HoldSchedule::Mode::periodic:
                if (j >= next_periodic_step) {
                    ev = true;
                    while (periodic_step(next_periodic) <= j) ++next_periodic;
                    next_periodic_step = periodic_step(next_periodic);
                }
                break;
            case HoldSchedule::Mode::event_triggered:
                if (t - last_event >= sc.schedule.event_floor - 1e-12 && trigger_value(sc, x, u) <= 0.0) ev = true;
                break;
        }
        if (ev) {
            u = sample(x, t);
            last_event = t;
        }
        record(t, x, u, ev);
    }
    return tr;
}

struct HoldInterval {
    double start = 0.0;
    double length = 0.0;
    double max_error = 0.0;  // max ||x(t_i) - x(t)|| over the interval
};

struct AnalysisReport {
    double min_h = std::numeric_limits<double>::infinity();
    double min_h_time = 0.0;
    std::optional<double> violation_time;
    std::size_t num_events = 0;
    std::optional<double> min_gap;
    std::optional<double> mean_gap;
    std::optional<double> max_gap;
    double max_hold_error = 0.0;
    double min_trigger = std::numeric_limits<double>::infinity();
    std::vector<HoldInterval> intervals;
};

inline AnalysisReport analyze(const Trace& tr, double violation_tol = 1e-9) {
    AnalysisReport rep;
    if (tr.rows() == 0) throw ConfigError("analyze: empty trace");
    for (std::size_t r = 0; r < tr.rows(); ++r) {
        if (tr.h[r] < rep.min_h) {
            rep.min_h = tr.h[r];
            rep.min_h_time = tr.t[r];
        }
        if (!rep.violation_time && tr.h[r] < -violation_tol) rep.violation_time = tr.t[r];
        rep.min_trigger = std::min(rep.min_trigger, tr.trigger[r]);
    }
    rep.num_events = tr.events.size();
    if (tr.events.size() >= 2) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
        for (std::size_t i = 1; i < tr.events.size(); ++i) {
            const double g = tr.span(tr.event_rows[i - 1], tr.event_rows[i]);
            lo = std::min(lo, g);
            hi = std::max(hi, g);
            sum += g;
        }
        rep.min_gap = lo;
        rep.max_gap = hi;
        rep.mean_gap = sum / static_cast<double>(tr.events.size() - 1);
    }
    // hold errors: the row flagged as an event carries the sampled state
    std::size_t start = 0;
    HoldInterval cur;
    for (std::size_t r = 0; r < tr.rows(); ++r) {
        if (tr.event[r]) {
            if (r > 0) {
                cur.length = tr.span(start, r);
                rep.intervals.push_back(cur);
            }
            start = r;
            cur = HoldInterval{tr.t[r], 0.0, 0.0};
        }
        // error just before a resample belongs to the closing interval
        const double e = (tr.state(r) - tr.state(start)).norm();
        cur.max_error = std::max(cur.max_error, e);
        if (r + 1 < tr.rows() && tr.event[r + 1]) {
            const double e_end = (tr.state(r + 1) - tr.state(start)).norm();
            cur.max_error = std::max(cur.max_error, e_end);
        }
        rep.max_hold_error = std::max(rep.max_hold_error, cur.max_error);
    }
    cur.length = tr.span(start, tr.rows() - 1);
    rep.intervals.push_back(cur);
    return rep;
}

// ---------------------------------------------------------------------------
// Output formats

inline void write_trace_csv(std::ostream& os, const Trace& tr) {
    os << "t";
    for (int i = 0; i < tr.n; ++i) os << ",x" << i;
    for (int i = 0; i < tr.m; ++i) os << ",u" << i;
    os << ",h,hdot,trigger,event\n";
    os << std::setprecision(17);
    for (std::size_t r = 0; r < tr.rows(); ++r) {
        os << tr.t[r];
        for (int i = 0; i < tr.n; ++i) os << ',' << tr.x[r * tr.n + i];
        for (int i = 0; i < tr.m; ++i) os << ',' << tr.u[r * tr.m + i];
        os << ',' << tr.h[r] << ',' << tr.hdot[r] << ',' << tr.trigger[r] << ',' << int(tr.event[r]) << '\n';
    }
}

inline void write_summary(std::ostream& os, const AnalysisReport& rep) {
    auto opt = [&](const std::optional<double>& v) {
        if (v) {
            os << *v;
        } else {
            os << "none";
        }
    };
    os << std::setprecision(17);
    os << "min_h " << rep.min_h << '\n';
    os << "min_h_time " << rep.min_h_time << '\n';
    os << "violation_time ";
    opt(rep.violation_time);
    os << '\n';
    os << "num_events " << rep.num_events << '\n';
    os << "miet ";
    opt(rep.min_gap);
    os << '\n';
    os << "max_hold_error " << rep.max_hold_error << '\n';
}

}  // namespace shcbf
