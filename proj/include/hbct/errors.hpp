#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hbct {

/// Precondition violated by the caller (shape mismatch, empty input, bad size).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A transcendental argument fell outside its domain by more than the clamp slack.
class NumericalDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// P_com / P_up anchors coincide, so the normalized metric is undefined.
class DegenerateBaseline : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingFailure : public std::runtime_error {
public:
    TrainingFailure(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hbct
