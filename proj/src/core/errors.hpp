#pragma once

#include <stdexcept>
#include <string>

namespace slrcmi {

// Error taxonomy mirrors the process exit codes: usage/config problems (2),
// data problems (3), numerical failures (4).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace slrcmi
