#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace shcbf;
using shcbf::test::vec;

namespace {

Scenario line_scenario(HoldSchedule schedule, double horizon = 1.0, double substep = 0.25) {
    OperatingRegion region;
    region.lower = vec({-10.0});
    region.upper = vec({10.0});
    return Scenario{"line",
                    CbfQpFilter{test::constant_dynamics(vec({0.0}), Matrix::Constant(1, 1, 1.0)),
                                test::first_coordinate(1), ClassKappa::linear(1.0),
                                [](const State& x) { return Input::Constant(1, -x[0] - 1.0); }},
                    ControllerKind::plain,
                    TunableControllerConfig{},
                    vec({2.0}),
                    IntegratorConfig{substep, horizon},
                    schedule,
                    region};
}

Trace synthetic_trace(const std::vector<double>& h, double dt) {
    Trace tr;
    tr.n = 1;
    tr.m = 1;
    tr.substep = dt;
    for (std::size_t i = 0; i < h.size(); ++i) {
        tr.push(i * dt, vec({h[i]}), vec({0.0}), h[i], 0.0, 1.0, i == 0);
    }
    return tr;
}

}  // namespace

TEST(IntegrateHeld, FrozenDynamics) {
    const auto dyn = test::constant_dynamics(vec({0, 0}), Matrix::Zero(2, 1));
    const auto xs = integrate_held(dyn, vec({1.5, -2}), vec({9.0}), 0.5, 0.01);
    ASSERT_EQ(xs.size(), 51u);
    for (const auto& x : xs) {
        EXPECT_EQ(x[0], 1.5);
        EXPECT_EQ(x[1], -2.0);
    }
}

TEST(IntegrateHeld, LinearDecayMatchesExponential) {
    ControlAffineDynamics dyn(
        1, 1, [](const State& x) { return Vector(-x); }, [](const State&) { return Matrix::Identity(1, 1).eval(); });
    const auto xs = integrate_held(dyn, vec({1.0}), vec({0.0}), 1.0, 1e-3);
    EXPECT_NEAR(xs.back()[0], std::exp(-1.0), 1e-8);
    // the rest of the path as well
    for (std::size_t k = 0; k < xs.size(); k += 100) EXPECT_NEAR(xs[k][0], std::exp(-1e-3 * k), 1e-8);
}

TEST(IntegrateHeld, ConstantInputIsExact) {
    const auto dyn = test::constant_dynamics(vec({0}), Matrix::Identity(1, 1));
    const auto xs = integrate_held(dyn, vec({0.25}), vec({2.0}), 0.5, 0.125);
    EXPECT_EQ(xs.back()[0], 1.25);
}

TEST(IntegrateHeld, RejectsFractionalDuration) {
    const auto dyn = test::constant_dynamics(vec({0}), Matrix::Identity(1, 1));
    EXPECT_THROW(integrate_held(dyn, vec({0.0}), vec({1.0}), 0.3, 0.25), ConfigError);
    EXPECT_THROW(integrate_held(dyn, vec({0.0}), vec({1.0}), 0.5, 0.0), ConfigError);
}

TEST(IntegrateHeld, DivergenceKeepsLastFiniteState) {
    ControlAffineDynamics dyn(
        1, 1, [](const State& x) { return Vector(x.array().square() * 1e3); },
        [](const State&) { return Matrix::Identity(1, 1).eval(); });
    try {
        integrate_held(dyn, vec({1.0}), vec({0.0}), 10.0, 0.01);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_TRUE(e.state.allFinite());
    }
}

TEST(Run, PeriodEqualToHorizonGivesOneEvent) {
    const Trace tr = run(line_scenario(HoldSchedule::periodic(1.0)));
    ASSERT_EQ(tr.events.size(), 1u);
    EXPECT_EQ(tr.events[0], 0.0);
    for (std::size_t r = 0; r < tr.rows(); ++r) EXPECT_EQ(tr.input(r)[0], tr.input(0)[0]);
}

TEST(Run, TraceLayout) {
    const Trace tr = run(line_scenario(HoldSchedule::periodic(0.5), 2.0, 0.25));
    ASSERT_EQ(tr.rows(), 9u);
    for (std::size_t r = 0; r < tr.rows(); ++r) EXPECT_EQ(tr.t[r], 0.25 * r);
    EXPECT_EQ(tr.event[0], 1);
    const AnalysisReport rep = analyze(tr);
    EXPECT_EQ(rep.num_events, 4u);
    EXPECT_EQ(*rep.min_gap, 0.5);
    EXPECT_EQ(*rep.max_gap, 0.5);
}

TEST(Run, ContinuousResamplesEverySubstep) {
    const Trace tr = run(line_scenario(HoldSchedule::continuous(), 1.0, 0.01));
    EXPECT_EQ(tr.events.size(), tr.rows() - 1);
    EXPECT_LT(tr.events.back(), tr.t.back());
}

TEST(Run, ZeroOrderHoldIsBitwiseConstant) {
    auto s = acc::base_scenario();
    s.controller = ControllerKind::tunable;
    s.schedule = HoldSchedule::periodic(0.5);
    s.integrator.horizon = 20.0;
    const Trace tr = run(s.build());
    for (std::size_t r = 1; r < tr.rows(); ++r) {
        if (!tr.event[r]) ASSERT_EQ(tr.input(r)[0], tr.input(r - 1)[0]) << "row " << r;
    }
}

TEST(Run, RegionExitAborts) {
    auto sc = line_scenario(HoldSchedule::periodic(1.0), 1.0, 0.01);
    sc.filter.nominal = [](const State&) { return Input::Constant(1, 50.0); };
    try {
        run(sc);
        FAIL() << "expected RegionExitError";
    } catch (const RegionExitError& e) {
        EXPECT_GT(e.time, 0.0);
        EXPECT_GT(e.state[0], 10.0);
    }
}

TEST(Run, UnsafeInitialStateRejected) {
    auto sc = line_scenario(HoldSchedule::periodic(1.0));
    sc.initial_state = vec({-1.0});
    EXPECT_THROW(run(sc), ConfigError);
}

TEST(Run, PeriodBelowSubstepRejected) {
    EXPECT_THROW(run(line_scenario(HoldSchedule::periodic(0.1), 1.0, 0.25)), ConfigError);
}

TEST(Run, InfeasibleQpAborts) {
    auto sc = line_scenario(HoldSchedule::periodic(1.0), 1.0, 0.01);
    sc.filter.dynamics = test::constant_dynamics(vec({-5.0}), Matrix::Zero(1, 1));
    EXPECT_THROW(run(sc), InfeasibleError);
}

TEST(Run, ContinuousPlainAccIsSafe) {
    auto s = acc::base_scenario();
    s.controller = ControllerKind::plain;
    s.schedule = HoldSchedule::continuous();
    EXPECT_GE(analyze(run(s.build())).min_h, -1e-6);
}

TEST(Run, EventTriggeredAccGapsAndGolden) {
    auto s = acc::base_scenario();
    s.schedule = HoldSchedule::event_triggered(0.25);
    const Trace tr = run(s.build());
    const auto rep = analyze(tr);
    ASSERT_TRUE(rep.min_gap);
    EXPECT_GE(*rep.min_gap, 0.25);
    EXPECT_GE(rep.min_h, -1e-9);

    auto pure = acc::base_scenario();
    pure.schedule = HoldSchedule::event_triggered(0.0);
    const auto rp = analyze(run(pure.build()));
    // measured on the first verified build
    EXPECT_EQ(rp.num_events, 6u);
    ASSERT_TRUE(rp.min_gap);
    EXPECT_NEAR(*rp.min_gap, 0.582, 1e-3);
    EXPECT_NEAR(rp.min_h, 0.0016, 1e-4);
}

TEST(Trigger, FreshSampleCarriesMargin) {
    auto s = acc::base_scenario();
    s.schedule = HoldSchedule::event_triggered(0.0);
    const Scenario sc = s.build();
    const Trace tr = run(sc);
    for (std::size_t r : tr.event_rows) EXPECT_GE(tr.trigger[r], s.tuning.margin - 1e-6) << "t=" << tr.t[r];
    // trigger stays positive inside each inter-event interval, up to the firing row
    for (std::size_t r = 0; r < tr.rows(); ++r) {
        if (r + 1 < tr.rows() && tr.event[r + 1]) continue;
        if (!tr.event[r]) {
            ASSERT_GT(tr.trigger[r], 0.0) << "t=" << tr.t[r];
        }
    }
}

TEST(Trigger, BoundaryInputWithZeroCIsZero) {
    auto sc = line_scenario(HoldSchedule::periodic(1.0));
    sc.tuning.c = 0.0;
    const State x = vec({1.5});
    // u = -h puts hdot exactly at -alpha(h)
    EXPECT_EQ(trigger_value(sc, x, vec({-1.5})), 0.0);
}

TEST(Analyze, SafeTraceHasNoViolation) {
    const auto rep = analyze(synthetic_trace({1.0, 0.5, 0.0, 0.2}, 0.1));
    EXPECT_FALSE(rep.violation_time);
    EXPECT_EQ(rep.min_h, 0.0);
}

TEST(Analyze, ReportsDipAndItsTime) {
    std::vector<double> h(50, 1.0);
    h[37] = -0.02;
    const auto rep = analyze(synthetic_trace(h, 0.1));
    EXPECT_EQ(rep.min_h, -0.02);
    EXPECT_NEAR(rep.min_h_time, 3.7, 1e-12);
    ASSERT_TRUE(rep.violation_time);
    EXPECT_NEAR(*rep.violation_time, 3.7, 1e-12);
}

TEST(Analyze, ToleranceSeparatesNoise) {
    const auto rep = analyze(synthetic_trace({1.0, -1e-10, 1.0}, 0.1));
    EXPECT_FALSE(rep.violation_time);
    EXPECT_TRUE(analyze(synthetic_trace({1.0, -1e-8, 1.0}, 0.1)).violation_time);
}

TEST(Analyze, PeriodicGapIsExact) {
    for (double p : {0.05, 0.4, 0.1}) {
        auto sc = line_scenario(HoldSchedule::periodic(p), 2.0, 0.001);
        const auto rep = analyze(run(sc));
        EXPECT_EQ(*rep.min_gap, p) << p;
        EXPECT_EQ(*rep.max_gap, p) << p;
    }
}

TEST(Analyze, HoldErrorMatchesStateDrift) {
    // x' = u with u held at the fresh value: error grows linearly over each hold
    auto sc = line_scenario(HoldSchedule::periodic(0.5), 1.0, 0.125);
    sc.filter.nominal = [](const State&) { return Input::Constant(1, 1.0); };
    const auto rep = analyze(run(sc));
    ASSERT_EQ(rep.intervals.size(), 2u);
    EXPECT_NEAR(rep.intervals[0].max_error, 0.5, 1e-15);
    EXPECT_NEAR(rep.max_hold_error, 0.5, 1e-15);
}

TEST(Analyze, EmptyTraceThrows) { EXPECT_THROW(analyze(Trace{}), ConfigError); }

TEST(Output, CsvHeaderAndPrecision) {
    const Trace tr = run(line_scenario(HoldSchedule::periodic(0.5), 0.5, 0.25));
    std::ostringstream os;
    write_trace_csv(os, tr);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    EXPECT_EQ(header, "t,x0,u0,h,hdot,trigger,event");
    std::getline(is, row);
    EXPECT_EQ(row.substr(0, 2), "0,");
    EXPECT_EQ(row.back(), '1');
    std::size_t lines = 1;
    while (std::getline(is, row)) {
        ++lines;
        // every value round-trips through text
        std::istringstream fields(row);
        std::string cell;
        std::getline(fields, cell, ',');
        EXPECT_EQ(std::stod(cell), tr.t[lines - 1]);
    }
    EXPECT_EQ(lines, tr.rows());
}

TEST(Output, SummaryKeys) {
    std::ostringstream os;
    write_summary(os, analyze(synthetic_trace({1.0, 2.0}, 0.1)));
    const std::string s = os.str();
    for (const char* key : {"min_h ", "min_h_time ", "violation_time none", "num_events 1", "miet none",
                            "max_hold_error "}) {
        EXPECT_NE(s.find(key), std::string::npos) << key;
    }
}

TEST(Determinism, IdenticalScenarioIdenticalCsv) {
    auto s = acc::base_scenario();
    s.schedule = HoldSchedule::periodic(0.4);
    s.integrator.horizon = 10.0;
    std::ostringstream a, b;
    write_trace_csv(a, run(s.build()));
    write_trace_csv(b, run(s.build()));
    EXPECT_EQ(a.str(), b.str());
}

TEST(SubstepConvergence, HalvingChangesMinHLittle) {
    for (const auto& coarse : acc::acc_scenarios()) {
        if (coarse.name != "F2b-2.5Hz" && coarse.name != "F3-event" && coarse.name != "F1-10Hz") continue;
        auto fine = coarse;
        fine.integrator.substep = coarse.integrator.substep / 2;
        const double a = analyze(run(coarse.build())).min_h;
        const double b = analyze(run(fine.build())).min_h;
        EXPECT_LT(std::abs(a - b), 1e-6) << coarse.name << ": " << a << " vs " << b;
    }
}

TEST(ErrorBoundSoundness, HoldIntervalsStayInsideAnalyticBound) {
    const auto s = acc::base_scenario();
    const auto f = acc::make_filter(s.params, ClassKappa::linear(1.0));
    const Controller k = [&](const State& x) { return solve_cbf_qp(f, x); };
    const BoundSet b = estimate_bounds(s.region, f.dynamics, k, f.barrier, s.tuning.sigmoid());
    for (auto kind : {ControllerKind::plain, ControllerKind::tunable}) {
        auto run_s = s;
        run_s.controller = kind;
        run_s.schedule = HoldSchedule::periodic(0.5);
        run_s.integrator.horizon = 20.0;
        const auto rep = analyze(run(run_s.build()));
        for (const auto& iv : rep.intervals) {
            const double bound = kind == ControllerKind::plain ? error_bound_plain(b, iv.length)
                                                               : error_bound_tunable(b, s.tuning.epsilon, iv.length);
            ASSERT_LE(iv.max_error, bound) << "interval at " << iv.start;
        }
    }
}
