#pragma once

#include <stdexcept>
#include <string>

namespace fluxcav {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

// Requested Hilbert space exceeds the configured dimension limit.
class ResourceError : public Error {
public:
    using Error::Error;
};

// Input violates an operation precondition (e.g. non-Hermitian matrix).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class LabeledStateUnavailable : public Error {
public:
    using Error::Error;
};

class NoCrossing : public Error {
public:
    using Error::Error;
};

class NoPeak : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class SingularRegression : public Error {
public:
    using Error::Error;
};

// Input table is missing a column or has unparseable content.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Wraps a failure at one point of a flux sweep.
class SweepPointError : public Error {
public:
    SweepPointError(double flux, const std::string& what)
        : Error("flux " + std::to_string(flux) + ": " + what), flux_(flux) {}

    double flux() const noexcept { return flux_; }

private:
    double flux_;
};

} // namespace fluxcav
