#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace homoenc {

/// Base for every error thrown by the library. The CLI maps subclasses to
/// exit codes (usage/config 2, I/O and parse 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Out-of-domain argument to a special function or a tape op.
/// node_id is the offending tape node, or npos outside a tape.
class DomainError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit DomainError(const std::string& what, std::size_t node_id = npos)
      : Error(node_id == npos ? what
                              : what + " (node " + std::to_string(node_id) + ")"),
        node_id_(node_id) {}
  std::size_t node_id() const noexcept { return node_id_; }

 private:
  std::size_t node_id_;
};

/// Non-finite loss or gradient during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace homoenc
