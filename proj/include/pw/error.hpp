#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pw {

// Invalid argument or out-of-range parameter at a module boundary.
struct ParameterError : std::invalid_argument {
    explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Joint configuration outside its declared limits; message names the joint.
struct LimitViolation : std::domain_error {
    explicit LimitViolation(const std::string& msg) : std::domain_error(msg) {}
};

// Malformed on-disk data. byte_offset points at the first invalid byte.
struct FormatError : std::runtime_error {
    FormatError(const std::string& msg, std::uint64_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    std::uint64_t byte_offset = 0;
};

// File schema version not supported by this build.
struct VersionError : std::runtime_error {
    explicit VersionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced where the contract requires finite results.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged; epoch_index identifies when.
struct TrainingError : std::runtime_error {
    TrainingError(const std::string& msg, int epoch)
        : std::runtime_error(msg + " (epoch " + std::to_string(epoch) + ")"),
          epoch_index(epoch) {}
    int epoch_index = 0;
};

// Bad run configuration (unknown key, missing section, invalid value).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O failure distinct from format problems (missing file, write failure).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint incompatible with the requested run configuration.
struct CheckpointMismatch : std::runtime_error {
    explicit CheckpointMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pw
