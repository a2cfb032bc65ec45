#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vlmap {

/// Base of every exception thrown by the library. `kind()` is a short stable
/// token used by the CLI for its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Caller passed arguments that violate a precondition.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input", what) {}
};

/// Malformed binary or text file. `offset` is the byte position where
/// decoding stopped (or 0 for text formats).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error("format", what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed file carrying values outside their domain.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

class TrackingLost : public Error {
 public:
  explicit TrackingLost(const std::string& what) : Error("tracking_lost", what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error("capacity", what) {}
};

class GeometryError : public Error {
 public:
  GeometryError(std::string kind, const std::string& what)
      : Error(std::move(kind), what) {}
};

}  // namespace vlmap
