#pragma once

#include <stdexcept>
#include <string>

namespace knnlab {

// Bad argument values: dimension mismatch, k out of range, empty grids.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A formula evaluated where it is undefined (zero density, off-boundary point).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An operation called with a configuration it does not serve.
class MisuseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// The decision boundary is empty or not representable (e.g. w = 0).
class DegenerateBoundaryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : std::runtime_error(what + " (row " + std::to_string(row) + ", column " +
                           std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace knnlab
