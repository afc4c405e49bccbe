#pragma once

#include <cstddef>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace invad {

inline constexpr std::size_t kNoStep = std::numeric_limits<std::size_t>::max();

namespace detail {
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace detail

/// Base for every error raised by the library. `kind()` is the stable,
/// machine-readable name used in CLI error reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

class DomainError : public Error {
 public:
  DomainError(std::size_t step, std::string op)
      : Error(describe(step, op)), step_(step), op_(std::move(op)) {}

  const char* kind() const noexcept override { return "DomainError"; }
  std::size_t step() const noexcept { return step_; }
  const std::string& op() const noexcept { return op_; }

 private:
  static std::string describe(std::size_t step, const std::string& op) {
    std::string msg = "argument outside the domain of '" + op + "'";
    if (step != kNoStep) msg += " at step " + std::to_string(step);
    return msg;
  }
  std::size_t step_;
  std::string op_;
};

class SingularStepError : public Error {
 public:
  SingularStepError(std::size_t step, double magnitude)
      : Error("step " + std::to_string(step) +
              " has a non-invertible linearization (|a| = " +
              detail::format_real(magnitude) + ")"),
        step_(step),
        magnitude_(magnitude) {}

  const char* kind() const noexcept override { return "SingularStepError"; }
  std::size_t step() const noexcept { return step_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  std::size_t step_;
  double magnitude_;
};

class NoLocalInverseError : public Error {
 public:
  explicit NoLocalInverseError(std::string op)
      : Error("op '" + op + "' has no local inverse"), op_(std::move(op)) {}
  const char* kind() const noexcept override { return "NoLocalInverseError"; }
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ValidationError"; }
};

class WidthUnderflowError : public Error {
 public:
  WidthUnderflowError(std::size_t position, std::size_t width, std::size_t n)
      : Error("live active width drops to " + std::to_string(width) +
              " < " + std::to_string(n) + " after " +
              std::to_string(position) +
              " scheduled nodes; the Jacobian is singular"),
        position_(position),
        width_(width) {}
  const char* kind() const noexcept override { return "WidthUnderflowError"; }
  std::size_t position() const noexcept { return position_; }
  std::size_t width() const noexcept { return width_; }

 private:
  std::size_t position_;
  std::size_t width_;
};

class SizeLimitError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "SizeLimitError"; }
};

class SingularLumpError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "SingularLumpError"; }
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "SingularMatrixError"; }
};

class MaxItersExceeded : public Error {
 public:
  MaxItersExceeded(Eigen::VectorXd best, double residual)
      : Error("Newton iteration limit reached (best residual " +
              detail::format_real(residual) + ")"),
        best_(std::move(best)),
        residual_(residual) {}
  const char* kind() const noexcept override { return "MaxItersExceeded"; }
  const Eigen::VectorXd& best() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t col, const std::string& message)
      : Error(std::to_string(line) + ":" + std::to_string(col) + ": " +
              message),
        line_(line),
        col_(col) {}
  const char* kind() const noexcept override { return "ParseError"; }
  std::size_t line() const noexcept { return line_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t line_;
  std::size_t col_;
};

}  // namespace invad
