#pragma once

#include <stdexcept>
#include <string>

namespace fpension {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Volatility matrix not invertible or too badly conditioned.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (t > T, x <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A state left the admissible region, e.g. X <= Z for a floor-based rule.
class AdmissibilityError : public Error {
public:
    using Error::Error;
};

/// A utility field is not strictly concave where the drift identity needs it.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// A simulated state became NaN or infinite.
class BlowUpError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration text (CLI exit code 2).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed configuration with invalid content (CLI exit code 3).
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// File system failure while reading or writing artifacts (CLI exit code 4).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace fpension
