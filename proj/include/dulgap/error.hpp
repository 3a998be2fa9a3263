#pragma once

#include <stdexcept>
#include <string>

namespace dulgap {

/// Base class for every error raised by the library. `code()` is a short
/// stable token the CLI prints so callers can parse failures.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string &what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string &code() const noexcept { return code_; }

private:
  std::string code_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string &what)
      : Error("dimension_mismatch", what) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string &what)
      : Error("invalid_argument", what) {}
};

struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string &what)
      : Error("infeasible", what) {}
};

struct TooLargeError : Error {
  explicit TooLargeError(const std::string &what)
      : Error("instance_too_large", what) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string &what)
      : Error("divergence", what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string &what)
      : Error("format_error", what) {}
};

} // namespace dulgap
