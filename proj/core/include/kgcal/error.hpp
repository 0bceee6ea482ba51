#pragma once

#include <stdexcept>
#include <string>

namespace kgcal {

// Base for every error raised by the library. The CLI maps these to a
// one-line diagnostic and a non-zero exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid sizes, fractions, budgets or config keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Malformed query DAGs or topology arity mismatches.
class ConstructionError : public Error {
public:
    using Error::Error;
};

class WorkloadError : public Error {
public:
    using Error::Error;
};

class ExecutionError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

}  // namespace kgcal
