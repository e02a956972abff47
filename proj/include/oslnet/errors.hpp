#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oslnet {

// Base of every error raised by the library. Subclasses let callers map
// failures onto exit codes without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class ScheduleExhaustedError : public Error {
public:
    using Error::Error;
};

class PairingError : public Error {
public:
    using Error::Error;
};

class DegenerateWeightsError : public Error {
public:
    DegenerateWeightsError(const std::string& what, std::size_t cls)
        : Error(what), class_index(cls) {}
    std::size_t class_index;
};

class DivergedError : public Error {
public:
    DivergedError(const std::string& what, std::size_t ep)
        : Error(what), epoch(ep) {}
    std::size_t epoch;
};

// Raised when the differences of a paired test have zero variance; the
// mean difference is still meaningful and travels with the error.
class DegenerateTestError : public Error {
public:
    DegenerateTestError(const std::string& what, double diff)
        : Error(what), mean_diff(diff) {}
    double mean_diff;
};

}  // namespace oslnet
