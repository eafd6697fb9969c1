#include "support.hpp"

#include <gtest/gtest.h>

using namespace shcbf;
using shcbf::test::vec;

namespace {

/// x' = u on the line, kept in x >= 0, nominal pushes toward -u_push.
CbfQpFilter line_filter(double u_push) {
    return CbfQpFilter{test::constant_dynamics(vec({0.0}), Matrix::Constant(1, 1, 1.0)), test::first_coordinate(1),
                       ClassKappa::linear(1.0), [u_push](const State&) { return Input::Constant(1, -u_push); }};
}

CbfQpFilter acc_si_filter() { return acc::make_filter(test::fast_decay_si_params(), ClassKappa::linear(1.0)); }

/// Brute-force minimiser of |u - u_des| over a grid, keeping points that satisfy
/// the barrier constraint evaluated through the closed-form ACC Lie derivatives.
double grid_qp(const acc::AccParams& p, const State& x, double centre, double step, double half_width) {
    const auto lie = acc::acc_barrier_lie(p, x);
    const double u_des = acc::acc_nominal(p, x);
    const double h = acc::acc_barrier(p, x);
    double best = std::numeric_limits<double>::quiet_NaN();
    double best_cost = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(std::llround(half_width / step));
    for (int j = -n; j <= n; ++j) {
        const double u = centre + j * step;
        if (lie.lfh + lie.lgh[0] * u < -h) continue;
        const double cost = (u - u_des) * (u - u_des);
        if (cost < best_cost) {
            best_cost = cost;
            best = u;
        }
    }
    return best;
}

}  // namespace

TEST(CbfQp, InactiveConstraintReturnsNominal) {
    const auto f = line_filter(-2.0);  // pushes away from the boundary
    const State x = vec({1.0});
    EXPECT_EQ(solve_cbf_qp(f, x)[0], 2.0);
}

TEST(CbfQp, ActiveConstraintProjectsToBoundary) {
    const auto f = line_filter(5.0);
    const State x = vec({1.0});
    // u >= -h = -1
    EXPECT_EQ(solve_cbf_qp(f, x)[0], -1.0);
}

TEST(CbfQp, ZeroLghFeasibleKeepsNominal) {
    CbfQpFilter f{test::constant_dynamics(vec({0.5, 0.0}), Matrix::Zero(2, 1)), test::first_coordinate(2),
                  ClassKappa::linear(1.0), [](const State&) { return Input::Constant(1, 3.0); }};
    EXPECT_EQ(solve_cbf_qp(f, vec({1.0, 0.0}))[0], 3.0);
}

TEST(CbfQp, ZeroLghViolatedIsInfeasible) {
    CbfQpFilter f{test::constant_dynamics(vec({-5.0, 0.0}), Matrix::Zero(2, 1)), test::first_coordinate(2),
                  ClassKappa::linear(1.0), [](const State&) { return Input::Constant(1, 3.0); }};
    try {
        solve_cbf_qp(f, vec({1.0, 2.0}));
        FAIL() << "expected InfeasibleError";
    } catch (const InfeasibleError& e) {
        EXPECT_EQ(e.state[1], 2.0);
    }
}

TEST(CbfQp, AccZeroSpeedDegenerate) {
    // x2 = 0: L_g h = 0, L_f h = v0 > 0, so any h >= 0 is feasible
    const auto f = acc_si_filter();
    const State x = vec({0.0, 0.0, 10.0});
    EXPECT_EQ(solve_cbf_qp(f, x)[0], f.nominal(x)[0]);
}

TEST(CbfQp, MatchesBruteForceGridOnRandomAccStates) {
    const auto p = test::fast_decay_si_params();
    const auto f = acc::make_filter(p, ClassKappa::linear(1.0));
    std::mt19937_64 rng(2024);
    int active = 0;
    for (int i = 0; i < 1000; ++i) {
        const State x = test::random_acc_state(rng);
        const double u = solve_cbf_qp(f, x)[0];
        const double oracle = grid_qp(p, x, u, 1e-3, 1.0);
        ASSERT_FALSE(std::isnan(oracle)) << format_vector(x);
        ASSERT_NEAR(u, oracle, 2e-3) << format_vector(x);
        if (u != f.nominal(x)[0]) ++active;
    }
    EXPECT_GT(active, 100);  // the sample exercises both branches
    EXPECT_LT(active, 1000);
}

TEST(CbfQp, MinimalityIsBitExact) {
    const auto f = acc_si_filter();
    std::mt19937_64 rng(99);
    int checked = 0;
    for (int i = 0; i < 2000; ++i) {
        const State x = test::random_acc_state(rng);
        const Input ud = f.nominal(x);
        if (barrier_margin(f.dynamics, f.barrier, f.alpha, x, ud) < 0.0) continue;
        ASSERT_EQ(solve_cbf_qp(f, x)[0], ud[0]);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(CbfQp, MultiInputProjection) {
    CbfQpFilter f{test::constant_dynamics(vec({0.0, 0.0}), Matrix::Identity(2, 2)), test::first_coordinate(2),
                  ClassKappa::linear(1.0), [](const State&) { return vec({-3.0, 1.0}); }};
    const Input u = solve_cbf_qp(f, vec({1.0, 0.0}));
    EXPECT_NEAR(u[0], -1.0, 1e-15);
    EXPECT_NEAR(u[1], 1.0, 1e-15);
}

TEST(AdjustedControl, LargeEpsilonVanishes) {
    const auto f = acc_si_filter();
    TunableControllerConfig cfg;
    cfg.epsilon = 1e12;
    const State x = vec({0, 10, 200});
    EXPECT_NEAR(adjusted_control(f, cfg, x)[0], solve_cbf_qp(f, x)[0], 1e-9);
}

TEST(AdjustedControl, ZeroLghEqualsPlain) {
    CbfQpFilter f{test::constant_dynamics(vec({0.5, 0.0}), Matrix::Zero(2, 1)), test::first_coordinate(2),
                  ClassKappa::linear(1.0), [](const State&) { return Input::Constant(1, 3.0); }};
    TunableControllerConfig cfg;
    EXPECT_EQ(adjusted_control(f, cfg, vec({1.0, 0.0}))[0], solve_cbf_qp(f, vec({1.0, 0.0}))[0]);
}

TEST(AdjustedControl, AccCorrectionTerm) {
    const auto f = acc_si_filter();
    TunableControllerConfig cfg;
    cfg.epsilon = 1.0;
    const State x = vec({0, 10, 200});
    EXPECT_NEAR(adjusted_control(f, cfg, x)[0], solve_cbf_qp(f, x)[0] - 3.6 * 10.0 / 1650.0, 1e-12);
}

TEST(TunableControl, PlateausAndMidpoint) {
    // nominal drives into the boundary so k, k_a, k_T all differ in general
    const auto f = line_filter(1.0);
    TunableControllerConfig cfg;
    cfg.epsilon = 0.5;
    const double lgh = 1.0;
    const State far = vec({cfg.delta + cfg.band});
    EXPECT_NEAR(tunable_control(f, cfg, far)[0], solve_cbf_qp(f, far)[0], 1e-8 * lgh / cfg.epsilon);
    const State inside = vec({0.5 * cfg.delta});
    EXPECT_NEAR(tunable_control(f, cfg, inside)[0], adjusted_control(f, cfg, inside)[0], 1e-8 * lgh / cfg.epsilon);
    const State mid = vec({cfg.delta + 0.5 * cfg.band});
    EXPECT_EQ(tunable_control(f, cfg, mid)[0], solve_cbf_qp(f, mid)[0] + lgh / (2.0 * cfg.epsilon));
}

TEST(TunableControl, AccPlateaus) {
    const auto f = acc_si_filter();
    const auto cfg = acc::benchmark_tuning();
    for (double speed : {5.0, 15.0, 28.0}) {
        const double lgh = std::abs(acc::acc_barrier_lie(test::fast_decay_si_params(), vec({0, speed, 0})).lgh[0]);
        const State far = vec({0, speed, 1.8 * speed * speed + 2 * (cfg.delta + cfg.band)});
        EXPECT_NEAR(tunable_control(f, cfg, far)[0], solve_cbf_qp(f, far)[0], 1e-8 * lgh / cfg.epsilon);
        const State inside = vec({0, speed, 1.8 * speed * speed});
        EXPECT_NEAR(tunable_control(f, cfg, inside)[0], adjusted_control(f, cfg, inside)[0],
                    1e-8 * lgh / cfg.epsilon);
    }
}

TEST(TunableControl, ContinuousOnRandomPairs) {
    const auto s = acc::base_scenario();
    const auto f = acc::make_filter(s.params, ClassKappa::linear(1.0));
    const auto& cfg = s.tuning;
    // Lipschitz model: L_k plus the sigmoid slope times |dh| times lambda, with
    // generous region maxima (|grad h| <= 109, lambda <= 7.2, L_k <= 60)
    const double L = 60.0 + cfg.sigmoid().lipschitz() * 109.0 * 7.2 + 7.2 / cfg.epsilon;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 1000; ++i) {
        State x = test::random_acc_state(rng);
        // half of the pairs sit inside the sigmoid band where k_T changes fastest
        if (i % 2 == 0) x[2] = 1.8 * x[1] * x[1] + cfg.delta + detail::unit_uniform(rng) * cfg.band;
        Vector dir(3);
        for (int k = 0; k < 3; ++k) dir[k] = normal(rng);
        const State y = x + 1e-6 * dir.normalized();
        const double diff = (tunable_control(f, cfg, x) - tunable_control(f, cfg, y)).norm();
        ASSERT_LE(diff, L * 1e-6) << format_vector(x);
    }
}

TEST(ValidateTuning, SpecExamples) {
    const auto alpha = ClassKappa::linear(1.0);
    BoundSet b;
    b.mu = 2.0;
    TunableControllerConfig cfg;

    cfg.margin = 1.0;
    cfg.delta = 0.5;
    cfg.c = 3.0;
    cfg.epsilon = 1.0;
    auto rep = validate_tuning(cfg, b, alpha);
    EXPECT_TRUE(rep.checks[0].holds);
    EXPECT_EQ(rep.checks[0].rhs, 2.0);
    EXPECT_TRUE(rep.checks[1].holds);  // 1 <= 4/4, the boundary case
    EXPECT_EQ(rep.checks[1].rhs, 1.0);
    EXPECT_TRUE(rep.ok());

    cfg.margin = 2.0;
    cfg.c = 5.0;
    rep = validate_tuning(cfg, b, alpha);
    EXPECT_FALSE(rep.checks[1].holds);
    EXPECT_EQ(rep.checks[1].lhs, 1.0);
    EXPECT_EQ(rep.checks[1].rhs, 0.5);
    EXPECT_EQ(rep.checks[1].relation, "<=");
    EXPECT_FALSE(rep.ok());
}

TEST(ValidateTuning, CBelowThresholdFails) {
    BoundSet b;
    b.mu = 10.0;
    TunableControllerConfig cfg;
    cfg.margin = 1.0;
    cfg.delta = 0.5;
    cfg.c = 2.0;  // needs > 2
    const auto rep = validate_tuning(cfg, b, ClassKappa::linear(1.0));
    EXPECT_FALSE(rep.checks[0].holds);
}

TEST(ValidateTuning, BenchmarkTuningPassesWithBandCheck) {
    const auto s = acc::base_scenario();
    const auto f = acc::make_filter(s.params, ClassKappa::linear(1.0));
    OperatingRegion region = s.region;
    region.sample_count = 20000;
    const RegionSamples samples(region, f.barrier);
    const Controller plain = [&](const State& x) { return solve_cbf_qp(f, x); };
    const BoundSet b = estimate_bounds(samples, f.dynamics, plain, f.barrier, s.tuning.sigmoid());
    const auto rep = validate_tuning(s.tuning, b, f.alpha, BandContext{&f.dynamics, &f.barrier, &samples});
    ASSERT_EQ(rep.checks.size(), 3u);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.holds) << c.name << ": " << c.lhs << " " << c.relation << " " << c.rhs;
}

TEST(TunableControl, ContinuousTimeMarginOnCoarseGrid) {
    const auto s = acc::base_scenario();
    const auto f = acc::make_filter(s.params, ClassKappa::linear(1.0));
    const auto& cfg = s.tuning;
    const auto& r = s.region;
    int checked = 0;
    for (int i = 0; i < 15; ++i) {
        for (int j = 0; j < 15; ++j) {
            for (int k = 0; k < 15; ++k) {
                State x = r.lower + (r.upper - r.lower).cwiseProduct(vec({i / 14.0, j / 14.0, k / 14.0}));
                // pull every third point onto the thin band near the boundary
                if (k % 3 == 0) x[2] = 1.8 * x[1] * x[1] + (k / 14.0) * 2 * (cfg.delta + cfg.band);
                if (!(f.barrier(x) >= 0.0) || !r.contains(x)) continue;
                const Input u = tunable_control(f, cfg, x);
                const auto lie = lie_derivatives(f.dynamics, f.barrier, x);
                const double m = lie.lfh + lie.lgh.dot(u) + amplified_alpha(f.alpha, cfg.c, f.barrier(x));
                ASSERT_GE(m, cfg.margin - 1e-6) << format_vector(x);
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 500);
}
