#pragma once

#include <stdexcept>
#include <string>

namespace tf {

/// Raised when a field specification violates an existence gate.
class GateViolation : public std::runtime_error {
public:
    explicit GateViolation(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an iterative or adaptive routine fails to reach its tolerance.
class NonConvergence : public std::runtime_error {
public:
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tf
