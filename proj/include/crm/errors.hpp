#pragma once

#include <stdexcept>
#include <string>

namespace crm {

// Error taxonomy mirrored by the CLI's exit codes: configuration problems
// (bad flags, malformed mode declarations, inconsistent options) exit 1,
// data problems (unreadable or ill-formed facts/datasets/models) exit 2,
// training divergence exits 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace crm
