#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctk {

// Malformed expression or system-file text. `offset` is a byte offset into
// the source that was being parsed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// System file that parses but violates a structural constraint (dimension
// mismatch, indefinite metric, empty domain box, ...).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation outside the domain of an elementary function. `offset` is the
// source position of the offending node.
class DomainError : public std::runtime_error {
 public:
  DomainError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (expression offset " +
                           std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// The integrator gave up: step budget exhausted, step size underflow or a
// non-finite state. Solutions are assumed forward complete, so this usually
// means finite-time blowup.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t)
      : std::runtime_error(what + " at t=" + std::to_string(t)), t_(t) {}

  double time() const { return t_; }

 private:
  double t_;
};

// An analysis was called on inputs that violate its stated precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A report or data file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctk
