// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace coopsim {

/// Argument outside the mathematical domain of an operation (negative
/// variance, non-positive distance, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tensor or vector dimensions that do not fit together.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Zero-forcing cannot invert the channel (|lambda * h_est| too small).
class EqualizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Malformed configuration or input file. Carries the offending line when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace coopsim
