// A 2-D single integrator kept outside a disc, to show the generic API on a
// plant other than the ACC model.

#include "shcbf/simulator.hpp"

#include <iostream>

int main() {
    using namespace shcbf;
    const double r = 1.0;
    ControlAffineDynamics dyn(
        2, 2, [](const State&) { return Vector::Zero(2).eval(); },
        [](const State&) { return Matrix::Identity(2, 2).eval(); });
    BarrierFunction h([r](const State& x) { return x.squaredNorm() - r * r; },
                      [](const State& x) { return RowVector(2.0 * x.transpose()); });
    // head for the far side of the obstacle
    NominalController nominal = [](const State& x) {
        Vector goal(2);
        goal << 3.0, 0.1;
        return Input(goal - x);
    };

    TunableControllerConfig tuning;
    tuning.c = 1.0;
    tuning.delta = 0.05;
    tuning.band = 0.5;
    tuning.epsilon = 1.0;
    tuning.sharpness = SigmoidGain::default_sharpness(tuning.band);
    tuning.margin = 0.04;
    State x0(2);
    x0 << -3.0, 0.0;
    OperatingRegion region;
    region.lower = Vector::Constant(2, -4.0);
    region.upper = Vector::Constant(2, 4.0);

    const Scenario sc{"disc",           CbfQpFilter{dyn, h, ClassKappa::linear(2.0), nominal},
                      ControllerKind::tunable, tuning,
                      x0,               IntegratorConfig{1e-3, 10.0},
                      HoldSchedule::periodic(0.05), region};
    const Trace tr = run(sc);
    const AnalysisReport rep = analyze(tr);
    std::cout << "final state " << format_vector(tr.state(tr.rows() - 1)) << '\n';
    write_summary(std::cout, rep);
}
