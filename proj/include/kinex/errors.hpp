#pragma once

#include <stdexcept>
#include <string>

namespace kinex {

/// Requested domain cannot hold the distribution's mass (x_max too small,
/// or cumulative leak past the iteration guard).
class TruncationError : public std::runtime_error {
public:
    explicit TruncationError(const std::string& what) : std::runtime_error(what) {}
};

/// Two cumulative functions live on incompatible supports.
class SupportError : public std::runtime_error {
public:
    explicit SupportError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure (extrapolation, bracketing) failed to stabilize.
class NumericInstabilityError : public std::runtime_error {
public:
    explicit NumericInstabilityError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace kinex
