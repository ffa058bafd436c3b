#pragma once

// ============================================================================
// Shear-induced chaos in a stochastically forced oscillator on the cylinder
//
//   dy     = -alpha y dt + sigma sum_i f_i(theta) o dW^i,
//   dtheta = (1 + b y) dt,
//
// with phase functions satisfying sum_i f_i'(theta)^2 = 1. The top Lyapunov
// exponent has a closed quadrature form,
//
//   lambda1 = -alpha/2 + (b sigma / 2) * E[v],
//
// where v is distributed with density proportional to
// v^{-1/2} exp(-(b sigma/6) v^3 + (alpha^2/(2 b sigma)) v) on (0, inf).
// lambda1 changes sign at sigma0(alpha, b) = alpha^{3/2} / (sqrt(c0) b) for a
// universal constant c0 ~ 0.2823 computed here by root finding, never
// hard-coded. Monte Carlo estimators for the cylinder model and for the
// planar Hopf normal form with additive noise provide independent checks.
// ============================================================================

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dlimit/types.hpp"

namespace dlimit::shear {

/// Parameters of the cylinder model, including the noise phase functions
/// f_i and their derivatives. The defaults are f_1 = sin(2 pi theta)/(2 pi),
/// f_2 = cos(2 pi theta)/(2 pi), the simplest pair with sum f_i'^2 = 1.
struct ShearParams {
  double alpha = 1.0;  ///< dissipation, >= 0
  double b = 1.0;      ///< shear strength, >= 0
  double sigma = 1.0;  ///< noise amplitude, >= 0
  std::vector<std::function<double(double)>> f;        ///< phase functions
  std::vector<std::function<double(double)>> f_prime;  ///< their derivatives

  ShearParams();
  ShearParams(double alpha_, double b_, double sigma_);

  /// max over a uniform theta grid of |sum_i f_i'(theta)^2 - 1|.
  double sum_condition_residual(int n_grid = 1000) const;
};

enum class LyapMethod { Quadrature, MonteCarlo };

/// A pair of Lyapunov exponents with provenance; quadrature pairs satisfy
/// lambda1 + lambda2 = -alpha by construction.
struct LyapPair {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  LyapMethod method = LyapMethod::Quadrature;
  std::optional<double> se;  ///< standard error of lambda1 (Monte Carlo only)
};

/// Exact Lyapunov exponents of the cylinder model by adaptive quadrature.
/// Degenerate axes: b*sigma = 0 gives (0, -alpha); alpha = 0 with noise is
/// handled by the same integral. Throws InputError on negative parameters and
/// NumericalError("QuadratureNonConvergent") if the integration domain cannot
/// be stabilized.
LyapPair lyapunov_quadrature(double alpha, double b, double sigma);

/// The universal constant c0: solves lambda1(1, 1, sigma) = 0 by bisection
/// and returns 1/sigma^2. Cached after the first call. Throws
/// NumericalError("BracketingFailure") if no sign change is found.
double compute_c0();

/// sigma0(alpha, b) = alpha^{3/2} / (sqrt(c0) * b), the unique noise level
/// where lambda1 changes sign.
double sigma_zero(double alpha, double b);

/// Monte Carlo top exponent of the cylinder model from tangent-vector growth
/// under the Heun (Stratonovich) scheme, averaged over n_reps independent
/// paths; lambda2 from the exact trace rule lambda1 + lambda2 = -alpha.
LyapPair mc_lyapunov_cylinder(const ShearParams& params, double t_total,
                              int n_reps, std::uint64_t base_seed);

/// Monte Carlo top exponent of the Hopf normal form with additive noise,
///   dx = (alpha x - beta y - (a x - b y)(x^2+y^2)) dt + sigma dW^1,
///   dy = (alpha y + beta x - (b x + a y)(x^2+y^2)) dt + sigma dW^2.
/// lambda2 is inferred from the pathwise mean divergence 2 alpha - 4 a r^2.
LyapPair mc_lyapunov_hopf(double alpha, double beta, double a, double b,
                          double sigma, double t_total, int n_reps,
                          std::uint64_t base_seed);

}  // namespace dlimit::shear
