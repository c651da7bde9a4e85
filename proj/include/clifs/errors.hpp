#pragma once

#include <stdexcept>
#include <string>

namespace clifs {

// Every library failure derives from Error; the CLI maps the concrete
// type onto its exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

// Bad arguments or violated preconditions (exit 2).
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Configuration problems: missing runtimes, dimension mismatches (exit 2).
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Malformed input files (exit 3).
class FormatError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

// Train/test contamination detected by the augmentation lineage guard (exit 3).
class LeakageError : public FormatError {
public:
    using FormatError::FormatError;
};

// Model runtime or remote client failure (exit 4).
class InferenceError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace clifs
