#pragma once

#include <stdexcept>
#include <string>

namespace pml {

/// Error categories double as process exit codes for the CLI.
enum class ErrorCategory : int {
  kUsage = 1,
  kGeometry = 2,
  kSolver = 3,
  kResolution = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

/// Argument outside the mathematical domain of an operation (p <= 1, r out of gauge range, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

/// Violated operation precondition.
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

/// Request exceeds a hard resource bound (e.g. snowflake level).
class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(ErrorCategory::kGeometry, what) {}
};

/// Nonlinear or linear solve failed; carries the last residual where meaningful.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual = 0.0)
      : Error(ErrorCategory::kSolver, what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Discretization too coarse for the requested quantity.
class ResolutionError : public Error {
 public:
  explicit ResolutionError(const std::string& what) : Error(ErrorCategory::kResolution, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorCategory::kInternal, what) {}
};

}  // namespace pml
