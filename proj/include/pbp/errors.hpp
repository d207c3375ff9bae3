#pragma once

#include <stdexcept>
#include <string>

namespace pbp {

// Invalid input: malformed files, out-of-range values, broken preconditions.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime: singular regressions, zero-probability evidence.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Internal invariant violation; indicates a bug, not a bad input.
class internal_error : public std::logic_error {
public:
    explicit internal_error(const std::string& what) : std::logic_error(what) {}
};

}  // namespace pbp
