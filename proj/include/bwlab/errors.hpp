#pragma once

#include <stdexcept>
#include <string>

namespace bwlab {

/// Bad input: malformed files, contract violations on data, unknown columns.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: singular systems, non-convergence, invalid metric domains.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Command-line misuse (bad flags, missing arguments).
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bwlab
