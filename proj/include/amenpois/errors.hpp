#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace amenpois {

/// Invalid argument or value outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An enumeration or iteration exceeded its configured budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative numerical procedure failed to converge.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A field sample was queried outside the region it was sampled on.
class RegionError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A Monte-Carlo estimator had no data to condition on.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration validation failure; carries one message per offending field.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& s : issues) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> issues_;
};

}  // namespace amenpois
