#pragma once

#include <stdexcept>
#include <string>

namespace owl {

/// A caller-supplied argument violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A sampler could not produce its output (extinction, exhausted attempts,
/// step too coarse). Arguments were valid; the configuration is infeasible.
class FeasibilityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw PreconditionError(message);
}

}  // namespace owl
