#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace segdiscover {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent on-disk data. Carries the offending file and
/// the byte offset (or -1 when the problem is not positional).
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string file, std::int64_t offset, const std::string& what)
      : std::runtime_error(file + (offset >= 0 ? " @" + std::to_string(offset) : std::string()) +
                           ": " + what),
        file_(std::move(file)),
        offset_(offset) {}

  const std::string& file() const { return file_; }
  std::int64_t offset() const { return offset_; }

 private:
  std::string file_;
  std::int64_t offset_;
};

}  // namespace segdiscover
