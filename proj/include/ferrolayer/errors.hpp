#pragma once

#include <stdexcept>
#include <string>

namespace ferrolayer {

/// Bad input: configuration, grid or precondition violations. Maps to CLI exit status 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A solver gave up: singular linear system, exhausted step halving, non-contracting Picard
/// iteration. Maps to CLI exit status 3.
class SolverAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ferrolayer
