#pragma once

// ============================================================================
// Thin wrapper over GSL adaptive Gauss-Kronrod quadrature with lambdas and
// exceptions instead of the C error-handler protocol.
// ============================================================================

#include <functional>

namespace dlimit::kernel {

/// Adaptive GK15 integral of f over [a, b]. Throws NumericalError
/// ("QuadratureFailure") if the requested accuracy cannot be reached.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double abs_tol = 0.0,
                          double rel_tol = 1e-10);

}  // namespace dlimit::kernel
