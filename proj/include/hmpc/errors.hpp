#pragma once

#include <stdexcept>
#include <string>

namespace hmpc {

/// Base class for all exceptions thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical integration step produced a non-finite state.
class IntegrationDiverged : public Error {
public:
    explicit IntegrationDiverged(const std::string& what) : Error(what) {}
};

/// No stabilizing initial gain could be found for the Riccati iteration.
class NotStabilizable : public Error {
public:
    explicit NotStabilizable(const std::string& what) : Error(what) {}
};

/// The input-weight matrix is not invertible.
class SingularR : public Error {
public:
    explicit SingularR(const std::string& what) : Error(what) {}
};

/// The admissible-set iteration did not terminate within the iteration cap.
class NotDetermined : public Error {
public:
    explicit NotDetermined(const std::string& what) : Error(what) {}
};

/// The closed-loop matrix has spectral radius >= 1.
class UnstableClosedLoop : public Error {
public:
    explicit UnstableClosedLoop(const std::string& what) : Error(what) {}
};

/// A linear-model-only operation was invoked on a nonlinear model.
class NotLinear : public Error {
public:
    explicit NotLinear(const std::string& what) : Error(what) {}
};

/// An experiment or simulation configuration failed validation.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace hmpc
