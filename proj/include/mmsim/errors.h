#pragma once

#include <stdexcept>
#include <string>

namespace mmsim {

// Caller broke a precondition (dimension mismatch, non-unit quaternion,
// stepping a terminated env, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class InvalidShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoPathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BasePathInfeasibleError : public NoPathError {
public:
    using NoPathError::NoPathError;
};

class UnsolvableWorldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OffPlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EpisodeInfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mmsim
