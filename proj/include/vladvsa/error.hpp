#pragma once

#include <stdexcept>
#include <string>

namespace vladvsa {

/// Non-finite values where finite ones are required (diverged loss,
/// rejected optimizer step, failed gradient evaluation).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// File-level failures: missing file, bad magic, truncation.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vladvsa
