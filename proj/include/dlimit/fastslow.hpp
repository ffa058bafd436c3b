#pragma once

// ============================================================================
// Deterministic two-time-scale model problems.
//
// 1. The transcritical slow-passage normal form
//      x' = (x - y)(x + y) + eps^2 / delta,   y' = eps,
//    started on the attracting branch at (-3, -3). Depending on how delta
//    compares to eps the orbit either follows the exchanged stable branch
//    (crossing Sigma- = {x = -2, y in [1, 3]}), jumps at the bifurcation
//    point (crossing Sigma+ = {x = 2, y in [-1, 1]}), or tracks the repelling
//    branch as a canard inside an exponentially thin wedge around delta = eps.
//
// 2. The four-species Olsen model of the peroxidase-oxidase reaction in slow
//    time, whose oscillation character (relaxation / mixed-mode / chaotic)
//    is classified by the composite of a maxima count per window and the
//    sign of the top Lyapunov exponent.
// ============================================================================

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

#include "dlimit/ode.hpp"
#include "dlimit/types.hpp"

namespace dlimit::fastslow {

enum class TcLabel { ExchangeOfStability, CriticalTransition, Canard };

const char* to_string(TcLabel label);

/// Rectangular integration domain; leaving it without a verdict raises
/// NumericalError("Ambiguous").
struct Box {
  double x_min = -4.0;
  double x_max = 4.0;
  double y_min = -4.0;
  double y_max = 4.0;
};

struct TcConfig {
  double tube_factor = 3.0;  ///< canard tube half-width = tube_factor * eps
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
};

/// Classify the slow passage for eps in (0, 0.3], delta > 0. The canard
/// verdict is taken at the section y = 1: the orbit must sit inside the tube
/// |x - y| < tube_factor * eps with x > 0 there, one slow-time unit past the
/// bifurcation. Throws InputError for out-of-range parameters and
/// NumericalError("Ambiguous") when the orbit leaves the box undetermined.
TcLabel classify_transcritical(double eps, double delta, const Box& box = {},
                               const TcConfig& config = {});

/// Reaction constants of the Olsen model; alpha is the uptake coefficient in
/// the substrate equation.
struct OlsenParams {
  double p1 = 0.97;
  double p2 = 0.98;
  double p3 = 3.93;
  double p4 = 1.2e-5;
  double alpha = 1.0;
};

/// Slow-time right-hand side at state (a, b, x, y); the fast x-equation
/// carries the 1/eps scaling.
std::array<double, 4> olsen_rhs(const std::array<double, 4>& state, double eps,
                                double delta, const OlsenParams& params = {});

/// The same dynamics packaged for the integration kernel.
kernel::VectorField olsen_field(double eps, double delta,
                                const OlsenParams& params = {});

/// Row-major 4x4 Jacobian of olsen_field.
using MatrixField = std::function<void(double, const double*, double*)>;
MatrixField olsen_jacobian(double eps, double delta,
                           const OlsenParams& params = {});

/// Count strict interior local maxima of coordinate var_index inside the
/// time window, keeping only peaks that rise at least `prominence` above the
/// higher of the two flanking valleys.
int count_maxima(const kernel::Trajectory& traj, int var_index,
                 std::pair<double, double> window, double prominence = 0.0);

struct LyapEstimate {
  double lambda1 = 0.0;
  double se = 0.0;  ///< standard error of the linear fit of log-growth vs time
};

/// Benettin tangent-renormalization estimate of the top Lyapunov exponent.
/// The analytic jacobian is validated against finite differences at state0
/// (throws NumericalError("JacobianMismatch") on disagreement). The estimate
/// is the slope of accumulated log-growth over time, fitted after discarding
/// the leading fifth as transient.
LyapEstimate top_lyapunov_benettin(const kernel::VectorField& field,
                                   const MatrixField& jacobian,
                                   const std::vector<double>& state0,
                                   double t_total, double renorm_interval);

enum class OscLabel { Relaxation, MMO, Chaotic };

const char* to_string(OscLabel label);

/// Oscillation verdict with its raw ingredients. The labels follow the
/// composite rule: Relaxation iff the exponent is non-positive and the count
/// equals the calibrated k0; MMO iff non-positive and count exceeds k0;
/// Chaotic iff the exponent is significantly positive. All labels are
/// conjectural by construction.
struct OscResult {
  OscLabel label = OscLabel::Relaxation;
  int maxima_count = 0;
  int lyap_sign = -1;
  double lambda1 = 0.0;
  double lambda1_se = 0.0;
  int k0 = 0;
  bool conjectural = true;
};

/// Classify the Olsen oscillation at (eps, delta): integrate past the
/// transient, count x-maxima over [0, t_window] (slow time), estimate the
/// top Lyapunov exponent, and compare the count against k0 calibrated once
/// per eps in the relaxation regime delta = 10 eps^2. Throws
/// NumericalError("Indeterminate") when a positive exponent estimate is not
/// resolved against its error bar.
OscResult classify_olsen(double eps, double delta, double t_transient,
                         double t_window,
                         const std::array<double, 4>& seed_state,
                         const OlsenParams& params = {});

}  // namespace dlimit::fastslow
