#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace segaug {

// Error categories map to CLI exit codes: ValidationError (and subclasses)
// exit with 2, GeneratorError with 3, anything else with 4. Usage errors are
// handled by the argument parser and exit with 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data or configuration: malformed rasters, invariant violations,
// unknown class ids, impossible requests.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed PGM/PPM stream. Carries the byte offset where decoding failed.
class DecodeError : public ValidationError {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : ValidationError(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// External generator broke the process contract: bad exit status, timeout,
// or output that does not match the input label map.
class GeneratorError : public Error {
 public:
  using Error::Error;
};

}  // namespace segaug
