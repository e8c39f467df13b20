#pragma once

#include <stdexcept>
#include <string>

namespace sud {

/// Caller broke a documented precondition (shape mismatch, index out of range, ...).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

/// Input is valid in shape but numerically degenerate (e.g. a zero vector to normalize).
class DegenerateInput : public std::runtime_error {
public:
    explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid user configuration: bad JSON, unknown keys, infeasible geometry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem or parse failure on an artifact.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A run directory lacks an artifact that only exists when explicitly enabled.
class MissingArtifact : public IoError {
public:
    explicit MissingArtifact(const std::string& what) : IoError(what) {}
};

/// Non-finite gradient or loss during training.
class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void require(bool cond, const char* msg) {
    if (!cond) throw ContractViolation(msg);
}
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}
}  // namespace detail

}  // namespace sud
