#pragma once
#include <stdexcept>
#include <string>

namespace blocksel {

/// Shapes that do not line up (row mismatch, too few rows, ...).
class DimensionError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// An argument outside its mathematical domain, e.g. a threshold not in (0,1).
class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Invalid user configuration: group sizes, simulation specs, screening budgets.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite data or a numerical breakdown.
class NumericError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace blocksel
