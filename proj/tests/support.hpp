#pragma once

// Small plants shared by the unit tests.

#include "shcbf/acc.hpp"

#include <random>

namespace shcbf::test {

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) out[i++] = e;
    return out;
}

/// Constant drift and actuation.
inline ControlAffineDynamics constant_dynamics(const Vector& f, const Matrix& g) {
    return ControlAffineDynamics(
        static_cast<int>(f.size()), static_cast<int>(g.cols()), [f](const State&) { return f; },
        [g](const State&) { return g; });
}

/// h(x) = x[0]
inline BarrierFunction first_coordinate(int n) {
    return BarrierFunction([](const State& x) { return x[0]; },
                           [n](const State&) {
                               RowVector g = RowVector::Zero(n);
                               g[0] = 1.0;
                               return g;
                           });
}

inline acc::AccParams fast_decay_si_params() {
    acc::AccParams p = acc::AccParams::si();
    p.nominal_decay = 5.0;
    return p;
}

inline State random_acc_state(std::mt19937_64& rng, const OperatingRegion& r = acc::default_region()) {
    return detail::uniform_in(r, rng);
}

}  // namespace shcbf::test
