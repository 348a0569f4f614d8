#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace byzef {

// Bad argument to a pure function (dimension mismatch, k out of range, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid run/aggregator/attack configuration, detected before any compute.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Operation invoked on an object that cannot support it (e.g. sampling an empty shard).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Round messages do not match the set of registered workers.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace byzef
