#pragma once

#include <stdexcept>
#include <string>

namespace dam {

// Each error family maps onto one CLI exit code (see tools/damcl.cpp).

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or precondition violations inside the numeric core.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace dam
