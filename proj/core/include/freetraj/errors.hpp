#pragma once

#include <stdexcept>
#include <string>

namespace freetraj {

/// Bad user input: malformed shapes, configs, trajectories. The CLI maps
/// this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An argument outside the domain of a mathematical map (e.g. a point that
/// is not inside the box it is localized against).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A state that valid inputs can never reach.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace freetraj
