#pragma once

#include <stdexcept>
#include <string>

namespace rkopt {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested capability is not available (e.g. exact HVP on an oracle without one).
class Unsupported : public Error {
 public:
  using Error::Error;
};

/// No closed-form gradient-flow solution exists for the problem.
class NoClosedForm : public Error {
 public:
  using Error::Error;
};

/// A least-squares order fit saw an exactly-zero error.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// DAL-p was asked for a rate while H(θ)g(θ) = 0.
class UnboundedRate : public Error {
 public:
  using Error::Error;
};

/// A stage value or update went non-finite.
class DivergenceError : public Error {
 public:
  /// stage < 0 means the outer update rather than a stage.
  DivergenceError(int stage, const std::string& what)
      : Error(what), stage_(stage) {}

  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A configuration named a key that does not exist.
class UnknownKeyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class ParseErrorKind { io, bad_magic, truncated, count_mismatch };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace rkopt
