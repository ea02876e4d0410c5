#include "qfilter/errors.hpp"

#include <utility>

namespace qfilter {

namespace {

std::string join_issues(const std::vector<FieldIssue>& issues) {
  std::string out = "validation failed:";
  for (const auto& issue : issues) {
    out += "\n  " + issue.path + ": " + issue.message;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<FieldIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

ValidationError::ValidationError(std::string path, std::string message)
    : ValidationError(std::vector<FieldIssue>{{std::move(path), std::move(message)}}) {}

NumericalError::NumericalError(const std::string& what, std::size_t step, std::string scheme)
    : Error(what + " (step " + std::to_string(step) + (scheme.empty() ? "" : ", scheme " + scheme) +
            ")"),
      step_(step),
      scheme_(std::move(scheme)) {}

}  // namespace qfilter
