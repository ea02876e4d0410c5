#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfilter {

// Process exit codes used by the command layer.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  validation = 2,
  numerical = 3,
  verification = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::failure; }
};

// Operands live on different bases or have incompatible sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::validation; }
};

// A precondition on an argument's value was violated (e.g. non-normalized state).
class ContractError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::validation; }
};

// The requested configuration is valid but not handled (e.g. non-diagonal gauge channel).
class UnsupportedError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::validation; }
};

struct FieldIssue {
  std::string path;
  std::string message;
};

// One or more named configuration fields are invalid. All issues are aggregated.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldIssue> issues);
  ValidationError(std::string path, std::string message);

  const std::vector<FieldIssue>& issues() const noexcept { return issues_; }
  ExitCode exit_code() const noexcept override { return ExitCode::validation; }

 private:
  std::vector<FieldIssue> issues_;
};

// A time stepper produced non-finite output or an integrator drifted out of tolerance.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t step, std::string scheme = {});

  std::size_t step() const noexcept { return step_; }
  const std::string& scheme() const noexcept { return scheme_; }
  ExitCode exit_code() const noexcept override { return ExitCode::numerical; }

 private:
  std::size_t step_;
  std::string scheme_;
};

}  // namespace qfilter
