#pragma once

#include <stdexcept>
#include <string>

namespace twinforge {

/// Thrown when an operation's preconditions on its arguments are violated.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown by file readers/writers.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace twinforge
