#pragma once

#include <stdexcept>
#include <string>

namespace checknet {

// Dimension or length mismatch between operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid hyperparameter or run configuration, detected before any compute.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Training diverged or received non-finite gradients.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Corrupt file, version mismatch, or failed I/O.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Label or index out of range.
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

}  // namespace checknet
