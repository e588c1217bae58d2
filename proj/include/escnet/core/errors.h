#pragma once

#include <stdexcept>
#include <string>

namespace escnet {

// Malformed or unsupported input data (bad WAV header, bad manifest row).
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed an argument outside the documented domain.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Tensor extents incompatible with the requested operation.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration (bad flag combination, batch too small, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structural invariant violated at runtime (stream desynchronization).
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

// Training diverged or produced non-finite values.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace escnet
