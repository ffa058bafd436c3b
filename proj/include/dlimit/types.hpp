#pragma once

// ============================================================================
// Shared domain types for the (eps, second[, third]) parameter cone and the
// error taxonomy used across modules.
// ============================================================================

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace dlimit {

/// Interior point of the parameter cone: all stored components are strictly
/// positive. Axis points (a component exactly zero) use AxisPoint so that
/// "which component vanishes" is explicit, never a float comparison.
struct ParamPoint {
  double eps;
  double second;
  std::optional<double> third{};

  void validate() const {
    if (!(eps > 0.0) || !(second > 0.0) || (third && !(*third > 0.0)))
      throw std::invalid_argument("ParamPoint: components must be strictly positive");
  }
};

/// Point on a singular axis (or the origin) of the cone.
struct AxisPoint {
  bool eps_zero = false;
  bool second_zero = false;
  double eps = 0.0;     ///< value when eps_zero is false
  double second = 0.0;  ///< value when second_zero is false
};

using ConePoint = std::variant<ParamPoint, AxisPoint>;

// ============================================================================
// Error taxonomy. InputError maps to CLI exit code 1, NumericalError to 2.
// The code() string names the failure mode for machine-readable reporting.
// ============================================================================

class DlimitError : public std::runtime_error {
 public:
  DlimitError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InputError : public DlimitError {
 public:
  using DlimitError::DlimitError;
};

class NumericalError : public DlimitError {
 public:
  using DlimitError::DlimitError;
};

}  // namespace dlimit
