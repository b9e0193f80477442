#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hitl {

enum class ErrorKind {
  DegenerateFit,
  DegenerateSegment,
  UnknownPose,
  InsufficientSelection,
  OrderingViolation,
  EmptyRange,
  ResolutionMismatch,
  FeatureNotFound,
  ParseError,
  VersionMismatch,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with a 1-based line number and the byte offset where the
/// offending line (or the premature end of input) begins.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t byte_offset)
      : Error(ErrorKind::ParseError, what + " (line " + std::to_string(line) + ", byte " +
                                         std::to_string(byte_offset) + ")"),
        line_(line),
        byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

}  // namespace hitl
