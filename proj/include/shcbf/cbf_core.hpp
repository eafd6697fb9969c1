#pragma once

// Barrier functions, extended class-K functions, Lie derivatives, the sigmoid
// blending gain and the set-expansion helpers shared by every other header.

#include "shcbf/types.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace shcbf {

/// Control-affine vector fields: x' = f(x) + g(x) u, with f : R^n -> R^n and
/// g : R^n -> R^{n x m}.
class ControlAffineDynamics {
public:
    using Drift = std::function<Vector(const State&)>;
    using Actuation = std::function<Matrix(const State&)>;

    ControlAffineDynamics(int state_dim, int input_dim, Drift drift, Actuation actuation)
        : n_(state_dim), m_(input_dim), drift_(std::move(drift)), actuation_(std::move(actuation)) {
        if (n_ <= 0 || m_ <= 0) throw ConfigError("dynamics: state and input dimensions must be positive");
        if (!drift_ || !actuation_) throw ConfigError("dynamics: drift and actuation must be set");
    }

    int state_dim() const { return n_; }
    int input_dim() const { return m_; }

    Vector drift(const State& x) const {
        check_state(x);
        Vector f = drift_(x);
        if (f.size() != n_) throw ConfigError("dynamics: drift returned wrong dimension");
        return f;
    }

    Matrix actuation(const State& x) const {
        check_state(x);
        Matrix g = actuation_(x);
        if (g.rows() != n_ || g.cols() != m_) throw ConfigError("dynamics: actuation returned wrong shape");
        return g;
    }

    Vector velocity(const State& x, const Input& u) const {
        if (u.size() != m_) throw ConfigError("dynamics: input dimension mismatch");
        return drift(x) + actuation(x) * u;
    }

    void check_state(const State& x) const {
        if (x.size() != n_) {
            throw ConfigError("dynamics: state has dimension " + std::to_string(x.size()) + ", expected " +
                              std::to_string(n_));
        }
    }

private:
    int n_;
    int m_;
    Drift drift_;
    Actuation actuation_;
};

/// h : R^n -> R together with its gradient. The safe set is {x : h(x) >= 0}.
class BarrierFunction {
public:
    using Value = std::function<double(const State&)>;
    using Gradient = std::function<RowVector(const State&)>;

    BarrierFunction(Value value, Gradient gradient) : value_(std::move(value)), gradient_(std::move(gradient)) {
        if (!value_ || !gradient_) throw ConfigError("barrier: value and gradient must be set");
    }

    double operator()(const State& x) const { return value_(x); }
    double value(const State& x) const { return value_(x); }
    RowVector gradient(const State& x) const { return gradient_(x); }

private:
    Value value_;
    Gradient gradient_;
};

/// Extended class-K-infinity function. Linear and cubic kinds extend oddly to
/// negative arguments; a tabulated kind interpolates a strictly increasing
/// table through the origin and extrapolates with the end slopes.
class ClassKappa {
public:
    enum class Kind { linear, cubic, tabulated };

    static ClassKappa linear(double slope) {
        if (!(slope > 0.0) || !std::isfinite(slope)) throw ConfigError("class-K: linear slope must be > 0");
        return ClassKappa(Kind::linear, slope, {});
    }

    static ClassKappa cubic(double coef) {
        if (!(coef > 0.0) || !std::isfinite(coef)) throw ConfigError("class-K: cubic coefficient must be > 0");
        return ClassKappa(Kind::cubic, coef, {});
    }

    /// Points (r_i, alpha_i) sorted by r, strictly increasing in both, containing (0, 0).
    static ClassKappa tabulated(std::vector<std::pair<double, double>> table) {
        if (table.size() < 2) throw ConfigError("class-K: table needs at least two points");
        bool has_origin = false;
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (table[i].first == 0.0 && table[i].second == 0.0) has_origin = true;
            if (i > 0 && !(table[i].first > table[i - 1].first && table[i].second > table[i - 1].second)) {
                throw ConfigError("class-K: table must be strictly increasing");
            }
        }
        if (!has_origin) throw ConfigError("class-K: table must contain the origin");
        return ClassKappa(Kind::tabulated, 0.0, std::move(table));
    }

    Kind kind() const { return kind_; }
    double coefficient() const { return coef_; }
    const std::vector<std::pair<double, double>>& table() const { return table_; }

    double operator()(double r) const {
        switch (kind_) {
            case Kind::linear: return coef_ * r;
            case Kind::cubic: return coef_ * r * r * r;
            case Kind::tabulated: return interpolate(table_, r, false);
        }
        return 0.0;
    }

    bool invertible() const { return true; }

    double inverse(double y) const {
        switch (kind_) {
            case Kind::linear: return y / coef_;
            case Kind::cubic: return std::cbrt(y / coef_);
            case Kind::tabulated: return interpolate(table_, y, true);
        }
        return 0.0;
    }

    bool operator==(const ClassKappa& o) const {
        return kind_ == o.kind_ && coef_ == o.coef_ && table_ == o.table_;
    }

private:
    ClassKappa(Kind k, double c, std::vector<std::pair<double, double>> t)
        : kind_(k), coef_(c), table_(std::move(t)) {}

    static double interpolate(const std::vector<std::pair<double, double>>& t, double q, bool inverse) {
        auto key = [inverse](const std::pair<double, double>& p) { return inverse ? p.second : p.first; };
        auto val = [inverse](const std::pair<double, double>& p) { return inverse ? p.first : p.second; };
        std::size_t hi = 1;
        while (hi + 1 < t.size() && key(t[hi]) < q) ++hi;
        if (q < key(t[0])) hi = 1;
        const auto& a = t[hi - 1];
        const auto& b = t[hi];
        const double w = (q - key(a)) / (key(b) - key(a));
        return val(a) + w * (val(b) - val(a));
    }

    Kind kind_;
    double coef_;
    std::vector<std::pair<double, double>> table_;
};

/// Smooth gain that sits at 1/epsilon below delta and at 0 above delta + band.
struct SigmoidGain {
    double epsilon = 1.0;
    double delta = 0.0005;
    double band = 0.005;
    double sharpness = 200.0 / 0.005;

    /// Sharpness making the plateaus hold to 1e-8 relative outside (delta, delta + band).
    static double default_sharpness(double band) { return 200.0 / band; }

    void validate() const {
        if (!(epsilon > 0.0)) throw ConfigError("sigmoid: epsilon must be > 0");
        if (!(delta > 0.0)) throw ConfigError("sigmoid: delta must be > 0");
        if (!(band > 0.0)) throw ConfigError("sigmoid: band must be > 0");
        if (!(sharpness > 0.0)) throw ConfigError("sigmoid: sharpness must be > 0");
    }

    /// Maximum slope of the sigmoid.
    double lipschitz() const { return sharpness / (4.0 * epsilon); }
};

/// Strict ISSf margin d together with the class-K function it expands.
struct IssfExpansion {
    double margin = 1.0;
    ClassKappa base_alpha = ClassKappa::linear(1.0);

    /// alpha^{-1}(-d); negative for every valid expansion.
    double offset() const {
        if (!(margin > 0.0)) throw ConfigError("set expansion: margin d must be > 0");
        if (!base_alpha.invertible()) throw ConfigError("set expansion: alpha is not invertible at -d");
        return base_alpha.inverse(-margin);
    }
};

struct LieDerivatives {
    double lfh = 0.0;
    RowVector lgh;
};

inline LieDerivatives lie_derivatives(const ControlAffineDynamics& dyn, const BarrierFunction& h, const State& x) {
    dyn.check_state(x);
    const RowVector grad = h.gradient(x);
    if (grad.size() != dyn.state_dim()) throw ConfigError("lie derivatives: gradient dimension mismatch");
    LieDerivatives out;
    out.lfh = grad.dot(dyn.drift(x));
    out.lgh = grad * dyn.actuation(x);
    return out;
}

/// hdot(x, u) + alpha(h(x)); nonnegative iff the barrier condition holds at (x, u).
inline double barrier_margin(const ControlAffineDynamics& dyn, const BarrierFunction& h, const ClassKappa& alpha,
                             const State& x, const Input& u) {
    if (u.size() != dyn.input_dim()) throw ConfigError("barrier margin: input dimension mismatch");
    const auto lie = lie_derivatives(dyn, h, x);
    return lie.lfh + lie.lgh.dot(u) + alpha(h(x));
}

inline double sigmoid_gain(const SigmoidGain& gain, double r) {
    gain.validate();
    const double top = 1.0 / gain.epsilon;
    const double z = gain.sharpness * (r - gain.delta - 0.5 * gain.band);
    // exp overflows past ~709
    if (z > 700.0) return 0.0;
    if (z < -700.0) return top;
    return std::clamp(top / (1.0 + std::exp(z)), 0.0, top);
}

inline double amplified_alpha(const ClassKappa& alpha, double c, double r) {
    if (c < 0.0) throw ConfigError("amplified alpha: c must be >= 0");
    return (1.0 + c) * alpha(r);
}

/// h_e(x) = h(x) - alpha^{-1}(-d); its zero superlevel set is the expanded set.
inline double expanded_barrier(const BarrierFunction& h, const IssfExpansion& exp, const State& x) {
    return h(x) - exp.offset();
}

/// alpha_e(r) = alpha(r + alpha^{-1}(-d)) + d.
inline double expanded_alpha(const IssfExpansion& exp, double r) {
    return exp.base_alpha(r + exp.offset()) + exp.margin;
}

/// Central-difference gradient, used by tests and by the assumption checks.
inline RowVector numeric_gradient(const BarrierFunction& h, const State& x, double step) {
    RowVector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        State a = x, b = x;
        a[i] += step;
        b[i] -= step;
        g[i] = (h(a) - h(b)) / (2.0 * step);
    }
    return g;
}

}  // namespace shcbf
