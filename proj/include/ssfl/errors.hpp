#pragma once

#include <stdexcept>
#include <string>

namespace ssfl {

/// Shapes or layer chains that do not line up.
class StructuralError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A value outside the domain an operation accepts.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed, unknown or out-of-range configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ssfl
