#pragma once

#include <stdexcept>
#include <string>

namespace spiral {

/// Bad caller input: dimension mismatches, invalid ranges, malformed files.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid configuration (keys, divisibility constraints, tolerances).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operation not supported for the requested model/cycle.
struct UnsupportedError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Iterative solver failed to converge.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, double residual, int iterations)
        : std::runtime_error(msg), residual(residual), iterations(iterations) {}
    double residual;
    int iterations;
};

/// Relaxation collapsed onto a spatially uniform state; no wavetrain found.
struct NoWavetrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Time integration produced non-finite values.
struct BlowUpError : std::runtime_error {
    BlowUpError(const std::string& msg, long step_index)
        : std::runtime_error(msg), step_index(step_index) {}
    long step_index;
};

} // namespace spiral
