#pragma once

#include <stdexcept>
#include <string>

namespace drolab {

/// Invalid user-supplied configuration: bad parameters, malformed input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. a negative radius).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical solver could not produce a usable answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A brute-force oracle was asked to work outside the scale it is built for.
class OracleMisuse : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace drolab
