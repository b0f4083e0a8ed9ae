#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pressense {

/// Bad argument or violated precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate point configuration or non-invertible homography.
class SingularConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training loss became non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed record/config file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of a running touch session (e.g. frame size changed mid-session).
class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wire-protocol violation (message order, unknown type).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A typing session ended without an Enter key press.
class IncompleteSession : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pressense
