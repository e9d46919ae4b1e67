#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qcreg {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimensionError : public Error {
public:
    using Error::Error;
};

class DegenerateMeshError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Raised per face; carries the offending face index.
class FaceError : public Error {
public:
    FaceError(const std::string &what, std::size_t face)
        : Error(what + " (face " + std::to_string(face) + ")"), face_(face) {}
    std::size_t face() const noexcept { return face_; }

private:
    std::size_t face_;
};

class SingularFaceError : public FaceError {
public:
    using FaceError::FaceError;
};

class NearSingularError : public FaceError {
public:
    using FaceError::FaceError;
};

class DegeneratePerturbationError : public FaceError {
public:
    using FaceError::FaceError;
};

class NonQuasiconformalError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class PartitionError : public Error {
public:
    using Error::Error;
};

class ZeroVectorError : public Error {
public:
    using Error::Error;
};

class StageError : public Error {
public:
    using Error::Error;
};

class DegenerateImageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorKind {
    Unsupported,
    BadMagic,
    BadHeader,
    ZeroDimension,
    Truncated,
    TrailingBytes,
};

const char *to_string(FormatErrorKind kind) noexcept;

// File-format violation. `offset` is the byte position where parsing failed.
class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string &what)
        : Error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) + ": " + what),
          kind_(kind), offset_(offset) {}

    FormatErrorKind kind() const noexcept { return kind_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    FormatErrorKind kind_;
    std::uint64_t offset_;
};

// Wraps an error raised inside the optimizer loop with phase/iteration context.
class RegistrationError : public Error {
public:
    RegistrationError(const std::string &phase, int iteration, const std::string &cause)
        : Error(phase + " iteration " + std::to_string(iteration) + ": " + cause),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

} // namespace qcreg
