#pragma once

#include <stdexcept>
#include <string>

namespace ectail {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scenario or model violates a type invariant.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Transform evaluated at or beyond its pole (t >= alpha).
class PoleError : public Error {
public:
    using Error::Error;
};

// No t > 0 satisfies the stability margin for the given load.
class NoFeasibleT : public Error {
public:
    using Error::Error;
};

// (pi, t) pair violates the margin needed for the sojourn transform to exist.
class InfeasibleT : public Error {
public:
    using Error::Error;
};

// Node load at or beyond capacity.
class UnstableNode : public Error {
public:
    using Error::Error;
};

// No scheduling matrix satisfies row sums, support and node caps together.
class InfeasibleRegion : public Error {
public:
    using Error::Error;
};

class InsufficientSamples : public Error {
public:
    using Error::Error;
};

}  // namespace ectail
