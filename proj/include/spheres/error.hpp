#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spheres {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// An iterative method ran out of its iteration budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// The quadratic-net analysis was asked about a regime it does not cover (b >= 0).
class UnsupportedRegimeError : public Error {
public:
    using Error::Error;
};

/// Requested targets cannot be met (perfect-init probabilities, subspace error target).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// A forward cache does not belong to the network it is used with.
class StaleCacheError : public Error {
public:
    using Error::Error;
};

/// Malformed IDX data. `offset()` is the byte offset where parsing failed.
class IdxError : public Error {
public:
    enum class Kind { BadMagic, Truncated, CountMismatch, BadDimensions, Io };

    IdxError(Kind kind, std::uint64_t offset, const std::string& what)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
          kind_(kind),
          offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::uint64_t offset_;
};

/// Malformed checkpoint or cache file.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace spheres
