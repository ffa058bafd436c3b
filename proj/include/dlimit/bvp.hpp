#pragma once

// ============================================================================
// Membrane boundary value problem: a second-order equation for the deflection
// u(X) of an elastic membrane over [-1,1] with clamped ends u(+-1) = 0,
//
//   u'' = lambda / (1+u)^2 * [ 1 - eps^2 / (1+u)^2 ],
//
// where lambda > 0 is the applied potential and eps >= 0 a regularization
// that keeps solutions above u = -1 + eps. Solutions are even, so the solver
// shoots over half the interval with Newton on the augmented variational
// system, in two dual parametrizations: from the center (unknown u(0)) and
// from the wall (unknown slope u'(-1), which stays well-conditioned for deep
// solutions whose center sits exponentially close to the barrier). The
// equation also integrates by quadrature (conserved energy), giving the
// closed diagram representation lambda = tau(u0)^2 used as an independent
// oracle. A pseudo-arclength continuation in (lambda, wall slope) traces the
// S-shaped bifurcation diagram ||u||_2^2 vs lambda and flags its folds; the
// small fold lambda_*(eps) scales like (3/4) eps. A closed-form classifier
// partitions the (eps, delta) quarter-plane (delta = sqrt(eps/lambda)) into
// the four singular-solution regimes.
// ============================================================================

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace dlimit::bvp {

/// Which leaf of the S-curve a solution sits on, by center-depth heuristic:
/// Lower (shallow, stable), Middle (intermediate, unstable), Upper (deep,
/// pressed toward the barrier u = -1 + eps, stable). Near a fold the two
/// merging leaves are inherently indistinguishable.
enum class BranchTag { Lower, Middle, Upper };

const char* to_string(BranchTag t);

/// A converged solution profile on a uniform grid over [-1, 1], even by
/// construction (integrated on [0, 1] and mirrored).
struct MemsSolution {
  double lambda = 0.0;
  double eps = 0.0;
  std::vector<double> xs;  ///< uniform grid over [-1, 1]
  std::vector<double> us;  ///< deflection u(X)
  std::vector<double> ws;  ///< derivative u'(X)
  double norm_sq = 0.0;    ///< integral of u^2 over [-1, 1] (Simpson)
  double u0 = 0.0;         ///< center deflection u(0) (the shooting unknown)
  double wall_slope = 0.0; ///< |u'(1)|
  BranchTag tag = BranchTag::Lower;
  double newton_residual = 0.0;  ///< |u(1)| at convergence
  int newton_iters = 0;
};

/// Wall residual r = u(X=1; u0, lambda) of the center-shot trajectory and
/// its partial derivatives from the variational equations. `singular` is set
/// when the integration hit the barrier guard 1 + u <= eps/2 instead of
/// reaching the wall; the derivatives are then meaningless.
struct ShootResidual {
  double r = 0.0;
  double dr_du0 = 0.0;
  double dr_dlambda = 0.0;
  bool singular = false;
};

ShootResidual mems_residual(double lambda, double eps, double u0);

/// Wall residual of the dual parametrization: shoot from the wall with
/// u(-1) = 0, u'(-1) = -w (w > 0) and report r = u'(0), the center slope,
/// with its partials. Well-conditioned on every leaf, including deep
/// solutions whose center distance above the barrier underflows.
struct WallResidual {
  double r = 0.0;
  double dr_dw = 0.0;
  double dr_dlambda = 0.0;
  bool singular = false;
};

WallResidual mems_residual_wall(double lambda, double eps, double w);

/// The equation integrates by quadrature: E = u'^2/2 - lambda*G(u) is
/// conserved, with G the antiderivative of (1+u)^-2 - eps^2 (1+u)^-4.
double mems_G(double u, double eps);

/// Half-interval transit integral tau(u0) = int_{u0}^{0} du /
/// sqrt(2 (G(u) - G(u0))): the wall-to-center travel distance at lambda = 1.
/// Solutions of the boundary value problem with center value u0 have
/// lambda = tau(u0)^2 exactly, so the entire bifurcation diagram is the
/// graph of mems_lambda_of. Used as an independent oracle for the shooting
/// and continuation machinery.
double mems_tau(double u0, double eps);
double mems_lambda_of(double u0, double eps);

/// Shoot for a solution from an initial center-deflection guess. Damped
/// Newton on the wall residual u(1), iterated internally in the log-distance
/// above the barrier (deep solutions sit exponentially close to u = -1+eps);
/// converges to a boundary residual < 1e-10. When the center distance of the
/// target root underflows double precision (deep leaf at larger lambda), the
/// solver switches to the energy-equivalent wall-slope parametrization and
/// converges the center-slope residual instead.
///
/// Throws InputError on bad arguments, NumericalError("SingularityHit") if
/// the initial guess drives the integration into the barrier 1 + u <= eps/2
/// (1e-6 for eps = 0), NumericalError("NewtonDiverged") if the iteration
/// fails to converge.
MemsSolution mems_shoot(double lambda, double eps, double u0_guess);

/// Shoot in the wall-slope parametrization directly: Newton on the center
/// slope u'(0) from the initial wall slope guess w_guess > 0.
MemsSolution mems_shoot_wall(double lambda, double eps, double w_guess);

/// Scan n_starts center-deflection guesses spanning the physical window
/// (-1 + eps, 0), keep the distinct converged solutions, and return them
/// ordered by increasing depth (shallowest first). Thread-parallel over
/// starts; results are scheduling-independent.
std::vector<MemsSolution> mems_multistart(double lambda, double eps,
                                          int n_starts = 48);

struct BranchOptions {
  double eps = 0.0;
  double lambda_start = 0.1;
  int direction = -1;  ///< sign of the initial d(lambda) along the branch
  int n_steps = 200;
  /// Center-deflection guess for the starting solution; NaN picks a shallow
  /// lower-branch start automatically.
  double u0_guess = std::numeric_limits<double>::quiet_NaN();
  bool stop_after_first_fold = false;  ///< continue 12 steps past it, then stop
  double lambda_min = 1e-4;  ///< terminate when the branch exits this window
  double lambda_max = 1.0;
  double initial_step = 0.02;  ///< arclength predictor step (adaptive)
};

/// One detected fold: the continuation index of the point preceding the
/// tangent sign change and the interpolated fold location.
struct FoldPoint {
  std::size_t index = 0;
  double lambda = 0.0;
  double u0 = 0.0;
};

struct MemsBranch {
  double eps = 0.0;
  std::vector<MemsSolution> solutions;
  std::vector<FoldPoint> folds;
  /// "steps", "lambda-window", "fold", "flat" (deep on the upper leaf the
  /// center-slope residual loses all sensitivity to the wall slope), or
  /// "stalled" (corrector lost conditioning mid-branch).
  std::string stop_reason;
};

/// Pseudo-arclength continuation of the solution curve, parametrized in
/// (lambda, wall slope w): w is a global smooth coordinate along the whole
/// S-curve, so both folds stay O(1) conditioned. Starts from a converged
/// solution at lambda_start, marches n_steps with an adaptive arclength
/// step, and flags folds where d(lambda)/ds changes sign.
///
/// Throws NumericalError("ContinuationStalled") if the corrector cannot make
/// progress before the branch has acquired at least five points; later
/// stalls terminate the branch with stop_reason "stalled".
MemsBranch mems_branch(const BranchOptions& opts);
MemsBranch mems_branch(double eps, double lambda_start, int direction,
                       int n_steps);

/// Locate the small saddle-node lambda_*(eps) where the middle and upper
/// leaves meet, by continuation downward in lambda from an upper-leaf wall
/// shot at lambda = max(2.5 eps, 0.02). Scales like (3/4) eps for small
/// eps.
double mems_fold(double eps);

/// Singular-solution regimes in the (eps, delta) quarter-plane, with
/// delta = sqrt(eps / lambda):
///   I   : 0 < eps < eps0 and sqrt(eps) <= delta <= 2/sqrt(3)
///   II  : eps = 0 and 0 < delta < 2/sqrt(3)
///   III : eps = 0 and delta = 0
///   IV  : everything else (no singular solutions)
enum class SsRegime { I, II, III, IV };

const char* to_string(SsRegime r);

/// Upper validity bound in eps for regime I; the analysis only requires it
/// to be "small".
inline constexpr double kSsEps0 = 0.25;

SsRegime classify_ss(double eps, double delta, double eps0 = kSsEps0);

}  // namespace dlimit::bvp
