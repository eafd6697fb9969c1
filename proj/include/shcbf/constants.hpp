#pragma once

// Numerical estimates of the regularity constants (bounds on f, g, k, L_g h
// and Lipschitz constants) over a compact operating box, plus the error-bound
// and sampling-time formulas that consume them.

#include "shcbf/cbf_core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace shcbf {

using Controller = std::function<Input(const State&)>;

/// Axis-aligned box the bounds are estimated over. Runs check that they stay inside it.
struct OperatingRegion {
    Vector lower;
    Vector upper;
    int sample_count = 100000;  // random points, and random pairs for Lipschitz quotients
    int grid_per_axis = 41;
    std::uint64_t seed = 1;
    double safety_factor = 1.1;

    int dim() const { return static_cast<int>(lower.size()); }

    void validate(int n) const {
        if (lower.size() != n || upper.size() != n) throw ConfigError("region: bounds must have the state dimension");
        for (int i = 0; i < n; ++i) {
            if (!(lower[i] < upper[i])) throw ConfigError("region: lower must be < upper componentwise");
        }
        if (sample_count <= 0) throw ConfigError("region: sample_count must be positive");
        if (grid_per_axis < 2) throw ConfigError("region: grid_per_axis must be >= 2");
        if (!(safety_factor >= 1.0)) throw ConfigError("region: safety_factor must be >= 1");
    }

    bool contains(const State& x, double rel_tol = 1e-12) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double slack = rel_tol * (upper[i] - lower[i]);
            if (!(x[i] >= lower[i] - slack && x[i] <= upper[i] + slack)) return false;
        }
        return true;
    }

    bool operator==(const OperatingRegion&) const = default;
};

struct BoundSet {
    double b_f = 0.0;       // sup ||f||
    double b_g = 0.0;       // sup ||g|| (spectral)
    double b_k = 0.0;       // sup ||k||
    double lambda = 0.0;    // sup ||L_g h||
    double mu = 0.0;        // inf over the boundary of ||L_g h||
    double m_lip = 0.0;     // Lipschitz constant of L_g h
    double l_k = 0.0;       // Lipschitz constant of k
    double l_sigma = 0.0;   // Lipschitz constant of the sigmoid gain
    double safety_factor = 1.0;

    void validate() const {
        for (double v : {b_f, b_g, b_k, lambda, mu, m_lip, l_k, l_sigma}) {
            if (!std::isfinite(v) || v < 0.0) throw ConfigError("bounds: every bound must be finite and >= 0");
        }
        if (mu > lambda) throw ConfigError("bounds: mu must not exceed lambda");
        if (!(safety_factor >= 1.0)) throw ConfigError("bounds: safety_factor must be >= 1");
    }
};

namespace detail {

// Deterministic uniform [0, 1) from a 64-bit engine; avoids the
// implementation-defined std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline State uniform_in(const OperatingRegion& r, std::mt19937_64& rng) {
    State x(r.dim());
    for (int i = 0; i < r.dim(); ++i) x[i] = r.lower[i] + unit_uniform(rng) * (r.upper[i] - r.lower[i]);
    return x;
}

inline double spectral_norm(const Matrix& g) {
    if (g.cols() == 1) return g.col(0).norm();
    if (g.rows() == 1) return g.row(0).norm();
    Eigen::JacobiSVD<Matrix> svd(g);
    return svd.singularValues()(0);
}

inline void require_finite(const Vector& v, const State& x, const char* what) {
    if (!v.allFinite()) {
        throw SamplingError(std::string("non-finite ") + what + " at state " + format_vector(x));
    }
}

}  // namespace detail

/// Sample sets shared by the bound estimator and the assumption checks.
/// Deterministic for a given region (seed included).
class RegionSamples {
public:
    RegionSamples(const OperatingRegion& region, const BarrierFunction& h) : region_(region) {
        region_.validate(region.dim());
        build_grid();
        build_random();
        build_boundary(h);
    }

    const OperatingRegion& region() const { return region_; }
    const std::vector<State>& grid() const { return grid_; }
    const std::vector<State>& random() const { return random_; }
    const std::vector<State>& boundary() const { return boundary_; }
    /// Grid nearest-neighbour pairs, short axis steps at grid points, then short random pairs.
    const std::vector<std::pair<State, State>>& pairs() const { return pairs_; }

    /// Newton projection onto {h = level}; nullopt when it does not converge.
    static std::optional<State> project_to_level(const BarrierFunction& h, State x, double level,
                                                 double tol = 1e-9, int max_iter = 60) {
        for (int it = 0; it < max_iter; ++it) {
            const double r = h(x) - level;
            if (std::abs(r) <= tol) return x;
            const RowVector g = h.gradient(x);
            const double g2 = g.squaredNorm();
            if (!(g2 > 0.0) || !std::isfinite(g2)) return std::nullopt;
            x -= (r / g2) * g.transpose();
            if (!x.allFinite()) return std::nullopt;
        }
        if (std::abs(h(x) - level) <= tol) return x;
        return std::nullopt;
    }

    /// Bisection on the segment [a, b] for h = level; requires a sign change.
    static State bisect_level(const BarrierFunction& h, State a, State b, double level, double tol = 1e-9) {
        double fa = h(a) - level;
        for (int it = 0; it < 200; ++it) {
            State mid = 0.5 * (a + b);
            const double fm = h(mid) - level;
            if (std::abs(fm) <= tol) return mid;
            if ((fm >= 0.0) == (fa >= 0.0)) {
                a = std::move(mid);
                fa = fm;
            } else {
                b = std::move(mid);
            }
        }
        return 0.5 * (a + b);
    }

private:
    void build_grid() {
        const int n = region_.dim();
        const int g = region_.grid_per_axis;
        std::vector<int> idx(n, 0);
        std::size_t total = 1;
        for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(g);
        grid_.reserve(total);
        std::vector<double> step(n);
        for (int i = 0; i < n; ++i) step[i] = (region_.upper[i] - region_.lower[i]) / (g - 1);
        for (std::size_t k = 0; k < total; ++k) {
            State x(n);
            for (int i = 0; i < n; ++i) x[i] = (idx[i] == g - 1) ? region_.upper[i] : region_.lower[i] + idx[i] * step[i];
            grid_.push_back(std::move(x));
            for (int i = 0; i < n; ++i) {
                if (++idx[i] < g) break;
                idx[i] = 0;
            }
        }
        // neighbours along each axis; index stride of axis i is g^i
        std::size_t stride = 1;
        for (int i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < total; ++k) {
                const std::size_t coord = (k / stride) % static_cast<std::size_t>(g);
                if (coord + 1 < static_cast<std::size_t>(g)) pairs_.emplace_back(grid_[k], grid_[k + stride]);
            }
            stride *= static_cast<std::size_t>(g);
        }
        grid_pair_count_ = pairs_.size();
        // short axis steps at every grid point, pointing into the box
        for (const auto& x : grid_) {
            for (int i = 0; i < n; ++i) {
                const double eta = 1e-6 * (region_.upper[i] - region_.lower[i]);
                State y = x;
                y[i] = (x[i] + eta <= region_.upper[i]) ? x[i] + eta : x[i] - eta;
                pairs_.emplace_back(x, std::move(y));
            }
        }
    }

    void build_random() {
        std::mt19937_64 rng(region_.seed);
        random_.reserve(region_.sample_count);
        for (int k = 0; k < region_.sample_count; ++k) random_.push_back(detail::uniform_in(region_, rng));
        // Short pairs: separation log-uniform between 1e-4 and 1e-1 of the box width.
        const int n = region_.dim();
        for (int k = 0; k < region_.sample_count; ++k) {
            const State& x = random_[k];
            const double scale = std::pow(10.0, -4.0 + 3.0 * detail::unit_uniform(rng));
            State y = x;
            for (int i = 0; i < n; ++i) {
                const double w = region_.upper[i] - region_.lower[i];
                y[i] = std::clamp(x[i] + scale * w * (2.0 * detail::unit_uniform(rng) - 1.0), region_.lower[i],
                                  region_.upper[i]);
            }
            if ((y - x).norm() > 0.0) pairs_.emplace_back(x, std::move(y));
        }
    }

    void build_boundary(const BarrierFunction& h) {
        double h_scale = 0.0;
        for (const auto& x : grid_) h_scale = std::max(h_scale, std::abs(h(x)));
        const double boundary_tol = 1e-3 * std::max(h_scale, 1e-12);

        auto keep = [&](const State& x) {
            if (region_.contains(x, 1e-9) && std::abs(h(x)) <= 1e-9) boundary_.push_back(x);
        };
        // grid points already close to the boundary, pushed onto it
        for (const auto& x : grid_) {
            const double hx = h(x);
            if (hx == 0.0) {
                boundary_.push_back(x);
            } else if (std::abs(hx) <= boundary_tol) {
                if (auto p = project_to_level(h, x, 0.0)) keep(*p);
            }
        }
        // sign changes along grid edges
        for (std::size_t k = 0; k < grid_pair_count_; ++k) {
            const auto& [a, b] = pairs_[k];
            const double ha = h(a), hb = h(b);
            if (ha != 0.0 && hb != 0.0 && ((ha > 0.0) != (hb > 0.0))) keep(bisect_level(h, a, b, 0.0));
        }
        // sign changes between consecutive random points
        for (std::size_t k = 0; k + 1 < random_.size(); k += 2) {
            const double ha = h(random_[k]), hb = h(random_[k + 1]);
            if (ha != 0.0 && hb != 0.0 && ((ha > 0.0) != (hb > 0.0))) keep(bisect_level(h, random_[k], random_[k + 1], 0.0));
        }
    }

    OperatingRegion region_;
    std::vector<State> grid_;
    std::vector<State> random_;
    std::vector<State> boundary_;
    std::vector<std::pair<State, State>> pairs_;
    std::size_t grid_pair_count_ = 0;
};

/// Sampled maxima inflated (and mu deflated) by the region's safety factor.
/// When a sigmoid gain is given, l_sigma is set to its analytic slope s/(4 eps).
inline BoundSet estimate_bounds(const RegionSamples& samples, const ControlAffineDynamics& dyn,
                                const Controller& controller, const BarrierFunction& h,
                                const std::optional<SigmoidGain>& sigmoid = std::nullopt) {
    const auto& region = samples.region();
    region.validate(dyn.state_dim());
    double bf = 0.0, bg = 0.0, bk = 0.0, lam = 0.0;
    auto visit = [&](const State& x) {
        const Vector f = dyn.drift(x);
        detail::require_finite(f, x, "drift");
        const Matrix g = dyn.actuation(x);
        if (!g.allFinite()) throw SamplingError("non-finite actuation at state " + format_vector(x));
        const Input u = controller(x);
        detail::require_finite(u, x, "controller output");
        const RowVector lgh = h.gradient(x) * g;
        if (!lgh.allFinite()) throw SamplingError("non-finite L_g h at state " + format_vector(x));
        bf = std::max(bf, f.norm());
        bg = std::max(bg, detail::spectral_norm(g));
        bk = std::max(bk, u.norm());
        lam = std::max(lam, lgh.norm());
    };
    for (const auto& x : samples.grid()) visit(x);
    for (const auto& x : samples.random()) visit(x);

    if (samples.boundary().empty()) throw SamplingError("no boundary samples found in the operating region");
    double mu = std::numeric_limits<double>::infinity();
    for (const auto& x : samples.boundary()) mu = std::min(mu, (h.gradient(x) * dyn.actuation(x)).norm());

    double m_lip = 0.0, l_k = 0.0;
    for (const auto& [x, y] : samples.pairs()) {
        const double dx = (x - y).norm();
        if (!(dx > 0.0)) continue;
        const RowVector gx = h.gradient(x) * dyn.actuation(x);
        const RowVector gy = h.gradient(y) * dyn.actuation(y);
        m_lip = std::max(m_lip, (gx - gy).norm() / dx);
        l_k = std::max(l_k, (controller(x) - controller(y)).norm() / dx);
    }

    const double sf = region.safety_factor;
    BoundSet b;
    b.b_f = sf * bf;
    b.b_g = sf * bg;
    b.b_k = sf * bk;
    b.lambda = sf * lam;
    b.mu = mu / sf;
    b.m_lip = sf * m_lip;
    b.l_k = sf * l_k;
    b.l_sigma = sigmoid ? sigmoid->lipschitz() : 0.0;
    b.safety_factor = sf;
    return b;
}

inline BoundSet estimate_bounds(const OperatingRegion& region, const ControlAffineDynamics& dyn,
                                const Controller& controller, const BarrierFunction& h,
                                const std::optional<SigmoidGain>& sigmoid = std::nullopt) {
    region.validate(dyn.state_dim());
    return estimate_bounds(RegionSamples(region, h), dyn, controller, h, sigmoid);
}

/// ||e|| <= (B_f + B_g B_k) t for the plain sample-and-hold controller.
inline double error_bound_plain(const BoundSet& b, double t_hold) {
    if (t_hold < 0.0) throw ConfigError("error bound: hold time must be >= 0");
    return (b.b_f + b.b_g * b.b_k) * t_hold;
}

/// Same bound for the tunable controller, whose correction adds at most lambda / eps.
inline double error_bound_tunable(const BoundSet& b, double epsilon, double t_hold) {
    if (t_hold < 0.0) throw ConfigError("error bound: hold time must be >= 0");
    if (!(epsilon > 0.0)) throw ConfigError("error bound: epsilon must be > 0");
    return (b.b_f + b.b_g * b.b_k + b.b_g * b.lambda / epsilon) * t_hold;
}

/// Hold time that keeps the expanded set {h >= alpha^{-1}(-d)} safe under the plain controller.
inline double practical_sampling_time(const BoundSet& b, double d) {
    if (!(d > 0.0)) throw ConfigError("practical sampling time: d must be > 0");
    const double rate = b.b_f + b.b_g * b.b_k;
    const double denom = rate * b.l_k * b.lambda;
    if (!(rate > 0.0 && b.l_k > 0.0 && b.lambda > 0.0) || !std::isfinite(denom)) {
        throw ConfigError("practical sampling time: degenerate bounds (zero denominator)");
    }
    return d / denom;
}

/// Hold time under which the tunable controller keeps the original set safe.
inline double violation_free_sampling_time(const BoundSet& b, double epsilon, double d) {
    if (!(d > 0.0)) throw ConfigError("violation-free sampling time: d must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("violation-free sampling time: epsilon must be > 0");
    const double sensitivity = b.l_sigma * b.lambda * b.lambda + (b.l_k + b.m_lip / epsilon) * b.lambda;
    const double rate = b.b_f + b.b_g * b.b_k + b.b_g * b.lambda / epsilon;
    const double denom = sensitivity * rate;
    if (!(sensitivity > 0.0 && rate > 0.0) || !std::isfinite(denom)) {
        throw ConfigError("violation-free sampling time: degenerate bounds (zero denominator)");
    }
    return d / denom;
}

// ---------------------------------------------------------------------------
// Assumption checks

/// Piecewise-linear lower envelope beta of h against distance to the boundary,
/// with beta(0) = 0 and beta nondecreasing.
struct MonotoneEnvelope {
    std::vector<double> radius;  // breakpoints, ascending, radius[0] == 0
    std::vector<double> value;   // beta at the breakpoints
    bool positive = false;       // beta > 0 at every breakpoint past min_radius
    double min_radius = 0.0;
};

/// Fits beta from (distance, h) pairs: beta(r_j) = min { h_i : dist_i >= r_j } at
/// distance quantiles, which is monotone by construction. The fit fails when some
/// sample farther than `radius_tol` from the boundary has h <= h_tol.
inline MonotoneEnvelope fit_monotone_envelope(std::vector<std::pair<double, double>> dist_h, double radius_tol,
                                              double h_tol, int breakpoints = 64) {
    MonotoneEnvelope env;
    env.min_radius = radius_tol;
    env.radius.push_back(0.0);
    env.value.push_back(0.0);
    if (dist_h.empty()) return env;
    std::sort(dist_h.begin(), dist_h.end());
    std::vector<double> suffix_min(dist_h.size());
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t i = dist_h.size(); i-- > 0;) {
        running = std::min(running, dist_h[i].second);
        suffix_min[i] = running;
    }
    env.positive = true;
    for (std::size_t i = 0; i < dist_h.size(); ++i) {
        if (dist_h[i].first > radius_tol && dist_h[i].second <= h_tol) env.positive = false;
    }
    for (int j = 1; j <= breakpoints; ++j) {
        const std::size_t i = std::min(dist_h.size() - 1, (dist_h.size() * j) / breakpoints);
        const double r = dist_h[i].first;
        if (r <= env.radius.back()) continue;
        env.radius.push_back(r);
        env.value.push_back(std::max(suffix_min[i], env.value.back()));
    }
    return env;
}

struct AssumptionCheck {
    std::string name;
    bool holds = false;
    std::string detail;
};

struct AssumptionReport {
    BoundSet bounds;
    std::vector<AssumptionCheck> checks;
    MonotoneEnvelope envelope;

    bool all_hold() const {
        for (const auto& c : checks)
            if (!c.holds) return false;
        return true;
    }
    const AssumptionCheck* first_failure() const {
        for (const auto& c : checks)
            if (!c.holds) return &c;
        return nullptr;
    }
};

inline AssumptionReport check_assumptions(const RegionSamples& samples, const ControlAffineDynamics& dyn,
                                          const Controller& controller, const BarrierFunction& h,
                                          const std::optional<SigmoidGain>& sigmoid = std::nullopt) {
    AssumptionReport rep;
    rep.bounds = estimate_bounds(samples, dyn, controller, h, sigmoid);
    const BoundSet& b = rep.bounds;
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(6);
        os << v;
        return os.str();
    };

    const bool bounded = std::isfinite(b.b_f) && std::isfinite(b.b_g) && std::isfinite(b.b_k);
    rep.checks.push_back({"bounded dynamics", bounded,
                          "B_f=" + num(b.b_f) + " B_g=" + num(b.b_g) + " B_k=" + num(b.b_k) +
                              " (finite on all region samples)"});
    rep.checks.push_back({"lipschitz controller", std::isfinite(b.l_k), "L_k=" + num(b.l_k)});
    rep.checks.push_back({"boundary control authority", b.mu > 0.0,
                          "mu=" + num(b.mu) + " over " + std::to_string(samples.boundary().size()) +
                              " boundary samples" + (b.mu > 0.0 ? "" : " (L_g h vanishes on the boundary)")});
    rep.checks.push_back({"lipschitz L_g h", std::isfinite(b.m_lip), "M=" + num(b.m_lip)});

    // distance to the boundary by Newton projection from interior samples
    const auto& region = samples.region();
    const double diam = (region.upper - region.lower).norm();
    double h_scale = 0.0;
    std::vector<std::pair<double, double>> dist_h;
    std::size_t tangent_zeros = 0;
    // a zero of h only bounds the safe set if h turns negative just outside it
    auto crosses = [&](const State& p) {
        const RowVector g = h.gradient(p);
        const double gn = g.norm();
        if (!(gn > 0.0)) return false;
        return h(p - (1e-6 * diam / gn) * g.transpose()) < 0.0;
    };
    auto add = [&](const State& x) {
        const double hx = h(x);
        if (!(hx >= 0.0)) return;
        h_scale = std::max(h_scale, hx);
        if (auto p = RegionSamples::project_to_level(h, x, 0.0)) {
            if (!crosses(*p)) ++tangent_zeros;
            dist_h.emplace_back((x - *p).norm(), hx);
        }
    };
    for (const auto& x : samples.grid()) add(x);
    for (const auto& x : samples.boundary()) add(x);
    rep.envelope = fit_monotone_envelope(dist_h, 1e-6 * diam, 1e-9 * std::max(h_scale, 1.0));
    rep.checks.push_back({"monotonic barrier", rep.envelope.positive && tangent_zeros == 0,
                          std::to_string(dist_h.size()) + " interior samples, " +
                              std::to_string(rep.envelope.radius.size()) + " envelope breakpoints, " +
                              std::to_string(tangent_zeros) + " zeros without a sign change"});
    return rep;
}

inline AssumptionReport check_assumptions(const OperatingRegion& region, const ControlAffineDynamics& dyn,
                                          const Controller& controller, const BarrierFunction& h,
                                          const std::optional<SigmoidGain>& sigmoid = std::nullopt) {
    region.validate(dyn.state_dim());
    return check_assumptions(RegionSamples(region, h), dyn, controller, h, sigmoid);
}

}  // namespace shcbf
