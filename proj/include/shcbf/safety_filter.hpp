#pragma once

// The CBF-QP safeguarding controller k, its epsilon-adjusted variant k_a and
// the sigmoid-blended tunable controller k_T.

#include "shcbf/cbf_core.hpp"
#include "shcbf/constants.hpp"

#include <optional>
#include <string>
#include <vector>

namespace shcbf {

using NominalController = Controller;

struct CbfQpFilter {
    ControlAffineDynamics dynamics;
    BarrierFunction barrier;
    ClassKappa alpha;
    NominalController nominal;
};

struct TunableControllerConfig {
    double c = 9.18;
    double delta = 0.0005;
    double band = 0.005;
    double epsilon = 1.0;
    double sharpness = 200.0 / 0.005;
    double margin = 0.004;  // the strict ISSf constant d

    SigmoidGain sigmoid() const { return SigmoidGain{epsilon, delta, band, sharpness}; }

    void validate() const {
        if (!(c > 0.0)) throw ConfigError("tuning: c must be > 0");
        if (!(margin > 0.0)) throw ConfigError("tuning: d must be > 0");
        sigmoid().validate();
    }

    bool operator==(const TunableControllerConfig&) const = default;
};

/// argmin ||u - u_des||^2 s.t. L_f h + L_g h u >= -alpha(h). One affine
/// constraint, so the minimiser is the projection onto a half-space.
inline Input solve_cbf_qp(const CbfQpFilter& filter, const State& x) {
    const Input u_des = filter.nominal(x);
    if (u_des.size() != filter.dynamics.input_dim()) throw ConfigError("cbf-qp: nominal input dimension mismatch");
    const auto lie = lie_derivatives(filter.dynamics, filter.barrier, x);
    const double rhs = -filter.alpha(filter.barrier(x)) - lie.lfh;
    if (lie.lgh.dot(u_des) >= rhs) return u_des;
    const double lgh2 = lie.lgh.squaredNorm();
    if (!(lgh2 > 0.0)) {
        throw InfeasibleError("cbf-qp infeasible: L_g h = 0 and L_f h < -alpha(h) at " + format_vector(x), x);
    }
    if (u_des.size() == 1) return Input::Constant(1, rhs / lie.lgh[0]);
    return u_des + lie.lgh.transpose() * ((rhs - lie.lgh.dot(u_des)) / lgh2);
}

/// k_a(x) = k(x) + (1/eps) L_g h(x)^T
inline Input adjusted_control(const CbfQpFilter& filter, const TunableControllerConfig& cfg, const State& x) {
    if (!(cfg.epsilon > 0.0)) throw ConfigError("adjusted control: epsilon must be > 0");
    const auto lie = lie_derivatives(filter.dynamics, filter.barrier, x);
    return solve_cbf_qp(filter, x) + lie.lgh.transpose() / cfg.epsilon;
}

/// k_T(x) = k(x) + sigma(h(x)) L_g h(x)^T
inline Input tunable_control(const CbfQpFilter& filter, const TunableControllerConfig& cfg, const State& x) {
    const auto lie = lie_derivatives(filter.dynamics, filter.barrier, x);
    const double gain = sigmoid_gain(cfg.sigmoid(), filter.barrier(x));
    return solve_cbf_qp(filter, x) + gain * lie.lgh.transpose();
}

struct TuningCheck {
    std::string name;
    bool holds = false;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string relation;  // how lhs must compare with rhs
};

struct TuningReport {
    std::vector<TuningCheck> checks;

    bool ok() const {
        for (const auto& c : checks)
            if (!c.holds) return false;
        return true;
    }
};

/// Sample points of {0 <= h < delta} used for the near-boundary authority check.
struct BandContext {
    const ControlAffineDynamics* dynamics = nullptr;
    const BarrierFunction* barrier = nullptr;
    const RegionSamples* samples = nullptr;
    int levels = 8;
};

inline TuningReport validate_tuning(const TunableControllerConfig& cfg, const BoundSet& bounds,
                                    const ClassKappa& alpha, const std::optional<BandContext>& band = std::nullopt) {
    cfg.validate();
    TuningReport rep;
    const double c_min = cfg.margin / alpha(cfg.delta);
    rep.checks.push_back({"c > d/alpha(delta)", cfg.c > c_min, cfg.c, c_min, ">"});
    const double eps_max = bounds.mu * bounds.mu / (4.0 * cfg.margin);
    rep.checks.push_back({"epsilon <= mu^2/(4d)", cfg.epsilon <= eps_max, cfg.epsilon, eps_max, "<="});

    if (band && band->dynamics && band->barrier && band->samples) {
        const auto& h = *band->barrier;
        const auto& region = band->samples->region();
        double min_lgh = std::numeric_limits<double>::infinity();
        std::size_t count = 0;
        for (const auto& xb : band->samples->boundary()) {
            for (int j = 0; j < band->levels; ++j) {
                const double level = cfg.delta * j / band->levels;
                auto p = RegionSamples::project_to_level(h, xb, level);
                if (!p || !region.contains(*p, 1e-9)) continue;
                min_lgh = std::min(min_lgh, (h.gradient(*p) * band->dynamics->actuation(*p)).norm());
                ++count;
            }
        }
        if (count == 0) min_lgh = 0.0;
        rep.checks.push_back(
            {"||L_g h|| >= mu/2 on 0 <= h < delta", min_lgh >= bounds.mu / 2.0, min_lgh, bounds.mu / 2.0, ">="});
    }
    return rep;
}

}  // namespace shcbf
