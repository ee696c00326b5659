#pragma once

#include <stdexcept>
#include <string>

namespace bsslasso {

// Precondition or type-invariant violation on caller input.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure inside an otherwise valid computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Coordinate descent hit its sweep cap before the KKT certificate closed.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double kkt_violation)
      : NumericalError(what), kkt_violation_(kkt_violation) {}
  double kkt_violation() const noexcept { return kkt_violation_; }

 private:
  double kkt_violation_;
};

// Malformed manifest, profile CSV or report file. `where` names the file and field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace bsslasso
