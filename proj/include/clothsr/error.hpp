#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clothsr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed text input (OBJ, config). Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Topology violations: out-of-range indices, non-manifold edges, isolated vertices.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Zero-area faces and similar geometric degeneracies.
class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& msg, std::size_t face)
      : Error(msg), face_(face) {}
  std::size_t face() const noexcept { return face_; }

 private:
  std::size_t face_;
};

/// A vertex whose one-ring cannot determine a deformation gradient.
class DegenerateNeighborhoodError : public Error {
 public:
  DegenerateNeighborhoodError(const std::string& msg, std::size_t vertex)
      : Error(msg), vertex_(vertex) {}
  std::size_t vertex() const noexcept { return vertex_; }

 private:
  std::size_t vertex_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vertex counts, frame counts or tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConnectivityError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on an object that is not ready for it (e.g. an untrained model).
class StateError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, std::size_t epoch)
      : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Binary or text file that does not follow its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace clothsr
