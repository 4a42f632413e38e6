#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace mflow {

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a balanced-transport operation receives measures whose masses
/// differ by more than the mass tolerance.
class MassMismatch : public std::invalid_argument {
public:
    MassMismatch(double mass1, double mass2);
    double mass1() const { return mass1_; }
    double mass2() const { return mass2_; }

private:
    double mass1_;
    double mass2_;
};

class LipschitzViolation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An atom (or an emitted velocity) left the lattice extent.
class SupportOverflow : public std::runtime_error {
public:
    explicit SupportOverflow(const std::string& what, std::optional<long> step = std::nullopt)
        : std::runtime_error(what), step_(step) {}
    std::optional<long> step() const { return step_; }

private:
    std::optional<long> step_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mflow
