#pragma once
#include <stdexcept>
#include <string>

namespace radisynth {

// Error taxonomy used across the library. All are runtime_errors so the CLI
// can map validation failures to exit code 1 and everything else to 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedConstructError : ValidationError {
    using ValidationError::ValidationError;
};
struct ContainmentError : ValidationError {
    using ValidationError::ValidationError;
};
struct TopologyError : ValidationError {
    using ValidationError::ValidationError;
};
struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};
struct PackingError : ValidationError {
    using ValidationError::ValidationError;
};
struct SamplingError : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateDataError : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateFitError : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateHitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientCoverageError : ValidationError {
    using ValidationError::ValidationError;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotFoundError : ValidationError {
    using ValidationError::ValidationError;
};

} // namespace radisynth
