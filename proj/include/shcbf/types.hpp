#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace shcbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

using State = Vector;
using Input = Vector;

// Error hierarchy. Everything thrown by the library derives from Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad parameters, dimension mismatches, degenerate bounds.
class ConfigError : public Error {
public:
    using Error::Error;
};

// The barrier constraint cannot be met by any input (L_g h = 0 with a violated constraint).
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, State at) : Error(what), state(std::move(at)) {}
    State state;
};

// Integration produced a non-finite state.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double t, State last_finite)
        : Error(what), time(t), state(std::move(last_finite)) {}
    double time;
    State state;
};

// A run left its declared operating region.
class RegionExitError : public Error {
public:
    RegionExitError(const std::string& what, double t, State at)
        : Error(what), time(t), state(std::move(at)) {}
    double time;
    State state;
};

// Bound estimation could not find what it needs (e.g. no boundary samples).
class SamplingError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::string format_vector(const Vector& v) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v[i];
    }
    os << ')';
    return os.str();
}

}  // namespace shcbf
