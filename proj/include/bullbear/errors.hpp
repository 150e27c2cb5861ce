#pragma once

#include <stdexcept>
#include <string>

namespace bullbear {

// Error taxonomy mirrored by the CLI exit codes: usage -> 1, data -> 2,
// numerical -> 3.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bullbear
