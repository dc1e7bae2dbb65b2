#pragma once

#include <stdexcept>
#include <string>

namespace kdbirl {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  configuration = 2,
  data = 3,
  numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

  const char* kind() const noexcept {
    switch (code_) {
      case ExitCode::configuration:
        return "configuration";
      case ExitCode::data:
        return "data";
      case ExitCode::numerical:
        return "numerical";
      default:
        return "internal";
    }
  }

 private:
  ExitCode code_;
};

// Invalid parameters, dimension mismatches, unknown ids.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ExitCode::configuration, what) {}
};

// Missing or ill-formed input files, empty datasets.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

// Non-finite values where a finite one is required.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::numerical, what) {}
};

}  // namespace kdbirl
