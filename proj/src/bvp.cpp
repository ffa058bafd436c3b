#include "dlimit/bvp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "dlimit/ode.hpp"
#include "dlimit/parallel.hpp"
#include "dlimit/quadrature.hpp"
#include "dlimit/types.hpp"

namespace dlimit::bvp {
namespace {

namespace kn = dlimit::kernel;

constexpr int kHalfCells = 100;  ///< profile grid cells per half interval

/// The barrier equilibrium u = -1 + eps.
double barrier(double eps) { return -1.0 + eps; }

constexpr double kSigmaFloor = -32.0;  ///< log-distance below which the
                                       ///< center value underflows double

/// Guard in terms of 1 + u: integration stops below this level.
double guard_level(double eps) { return eps > 0.0 ? 0.5 * eps : 1e-6; }

void validate_pair(double lambda, double eps) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InputError("NonPositiveLambda", "lambda must be positive");
  if (!(eps >= 0.0) || !std::isfinite(eps) || eps >= 1.0)
    throw InputError("BadEps", "eps must lie in [0, 1)");
}

/// Right-hand side factors of u'' = lambda * g(u). The evaluation floor
/// keeps trial stages finite below the guard, where the event section stops
/// the integration anyway.
struct Membrane {
  double lambda, eps, floor_1pu;

  double g(double u) const {
    const double s = std::max(1.0 + u, floor_1pu);
    const double s2 = s * s;
    return (1.0 - (eps * eps) / s2) / s2;
  }
  double gp(double u) const {
    const double s = std::max(1.0 + u, floor_1pu);
    const double s3 = s * s * s;
    return (-2.0 + 4.0 * (eps * eps) / (s * s)) / s3;
  }

  /// Augmented field: state (u, u', du, du', e, e') where (du, du') is the
  /// derivative with respect to the shooting unknown and (e, e') with
  /// respect to lambda.
  void operator()(double, const double* y, double* dy) const {
    const double gu = g(y[0]);
    const double gpu = gp(y[0]);
    dy[0] = y[1];
    dy[1] = lambda * gu;
    dy[2] = y[3];
    dy[3] = lambda * gpu * y[2];
    dy[4] = y[5];
    dy[5] = lambda * gpu * y[4] + gu;
  }
};

struct ShotOutcome {
  std::array<double, 6> end{};
  bool singular = false;
};

/// One half-interval shot of the augmented system with the barrier guard as
/// an event section. y0 carries the parametrization-specific initial data.
ShotOutcome shoot_augmented(double lambda, double eps,
                            const std::array<double, 6>& y0) {
  Membrane f{lambda, eps, 0.5 * guard_level(eps)};
  kn::VectorField vf = [&f](double t, const double* y, double* dy) {
    f(t, y, dy);
  };

  kn::EventSection guard;
  guard.coord = 0;
  guard.level = -1.0 + guard_level(eps);
  guard.direction = -1;

  kn::OdeOptions opts;
  opts.rel_tol = 1e-11;
  opts.abs_tol = 1e-13;

  kn::EventHit hit;
  const auto r = kn::integrate_ode_events(vf, 6, {0.0, 1.0}, y0.data(),
                                          {guard}, hit, opts);

  ShotOutcome out;
  if (r.status != kn::OdeStatus::Ok) {
    out.singular = true;
    return out;
  }
  const double* yf = r.traj.state(r.traj.size() - 1);
  std::copy(yf, yf + 6, out.end.begin());
  return out;
}

/// Center shot: start (u0, 0), residual u at the wall.
ShotOutcome shoot_center(double lambda, double eps, double u0) {
  return shoot_augmented(lambda, eps, {u0, 0.0, 1.0, 0.0, 0.0, 0.0});
}

/// Wall shot: start (0, -w), residual u' at the center.
ShotOutcome shoot_wall(double lambda, double eps, double w) {
  return shoot_augmented(lambda, eps, {0.0, -w, 0.0, -1.0, 0.0, 0.0});
}

/// Largest physically possible wall slope: the energy of a trajectory from
/// the wall that just reaches the barrier equilibrium.
double w_ceiling(double lambda, double eps) {
  return std::sqrt(std::max(
      0.0, 2.0 * lambda * (mems_G(0.0, eps) - mems_G(barrier(eps), eps))));
}

struct NewtonResult {
  double u0 = 0.0;       ///< center value of the converged trajectory
  double w = 0.0;        ///< wall slope of the converged trajectory
  double residual = 0.0;
  int iters = 0;
  bool from_wall = false;
};

/// Damped Newton on the wall residual u(1), iterated in the log-distance
/// sigma = ln(u0 - barrier) so that deep roots converge with O(1) steps.
NewtonResult newton_center(double lambda, double eps, double u0_guess) {
  const double b = barrier(eps);
  const double sigma_max = std::log(1.499 - eps);
  double sigma =
      std::clamp(std::log(std::max(u0_guess - b, 1e-300)), kSigmaFloor,
                 sigma_max);

  ShotOutcome shot = shoot_center(lambda, eps, b + std::exp(sigma));
  if (shot.singular)
    throw NumericalError("SingularityHit",
                         "integration from the initial guess reached "
                         "1 + u <= eps/2");

  for (int it = 1; it <= 80; ++it) {
    if (std::abs(shot.end[0]) < 1e-10) {
      NewtonResult out;
      out.u0 = b + std::exp(sigma);
      out.w = std::abs(shot.end[1]);
      out.residual = std::abs(shot.end[0]);
      out.iters = it - 1;
      return out;
    }
    const double dr_dsigma = shot.end[2] * std::exp(sigma);
    if (std::abs(dr_dsigma) < 1e-18)
      throw NumericalError("NewtonDiverged",
                           "wall residual derivative vanished");
    const double step = std::clamp(-shot.end[0] / dr_dsigma, -4.0, 4.0);
    double damp = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k, damp *= 0.5) {
      const double trial =
          std::clamp(sigma + damp * step, kSigmaFloor, sigma_max);
      if (trial == sigma) continue;
      ShotOutcome ts = shoot_center(lambda, eps, b + std::exp(trial));
      if (ts.singular) continue;
      sigma = trial;
      shot = ts;
      moved = true;
      break;
    }
    if (!moved)
      throw NumericalError("NewtonDiverged",
                           "no admissible damped step at sigma = " +
                               std::to_string(sigma));
  }
  throw NumericalError("NewtonDiverged",
                       "no convergence in 80 iterations at lambda = " +
                           std::to_string(lambda));
}

/// Damped Newton on the center-slope residual u'(0) in the wall slope w.
NewtonResult newton_wall(double lambda, double eps, double w_guess) {
  const double w_cap = 1.05 * w_ceiling(lambda, eps);
  double w = std::clamp(w_guess, 1e-12, w_cap);

  ShotOutcome shot = shoot_wall(lambda, eps, w);
  for (int k = 0; shot.singular && k < 40; ++k) {
    // Too steep: the trajectory dove into the barrier. Back off toward the
    // admissible band.
    w *= 0.97;
    shot = shoot_wall(lambda, eps, w);
  }
  if (shot.singular)
    throw NumericalError("NewtonDiverged",
                         "no admissible wall slope near the guess");

  for (int it = 1; it <= 80; ++it) {
    if (std::abs(shot.end[1]) < 1e-10) {
      NewtonResult out;
      out.u0 = shot.end[0];
      out.w = w;
      out.residual = std::abs(shot.end[1]);
      out.iters = it - 1;
      out.from_wall = true;
      return out;
    }
    const double dr = shot.end[3];
    if (std::abs(dr) < 1e-18)
      throw NumericalError("NewtonDiverged",
                           "center-slope derivative vanished off the root");
    double step = -shot.end[1] / dr;
    const double cap = 0.25 * (1.0 + w);
    step = std::clamp(step, -cap, cap);
    double damp = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k, damp *= 0.5) {
      const double trial = std::clamp(w + damp * step, 1e-12, w_cap);
      if (trial == w) continue;
      ShotOutcome ts = shoot_wall(lambda, eps, trial);
      if (ts.singular) continue;
      w = trial;
      shot = ts;
      moved = true;
      break;
    }
    if (!moved)
      throw NumericalError("NewtonDiverged",
                           "no admissible damped wall-slope step at w = " +
                               std::to_string(w));
  }
  throw NumericalError("NewtonDiverged",
                       "no convergence in 80 wall iterations at lambda = " +
                           std::to_string(lambda));
}

/// Branch entry point: center Newton with the energy-converted wall
/// fallback for deep guesses, mirroring mems_shoot.
NewtonResult newton_center_or_wall_entry(double lambda, double eps,
                                         double u0_guess) {
  try {
    return newton_center(lambda, eps, u0_guess);
  } catch (const NumericalError& e) {
    if (e.code() != "NewtonDiverged" ||
        u0_guess - barrier(eps) > 0.5 * (1.0 - eps))
      throw;
    const double wg = std::sqrt(std::max(
        1e-24, 2.0 * lambda * (mems_G(0.0, eps) - mems_G(u0_guess, eps))));
    return newton_wall(lambda, eps, wg);
  }
}

BranchTag tag_for(double eps, double u0) {
  const double depth = -u0;
  if ((eps > 0.0 && 1.0 + u0 <= 3.0 * eps) || depth >= 0.85)
    return BranchTag::Upper;
  if (depth <= 0.35) return BranchTag::Lower;
  return BranchTag::Middle;
}

/// Build the mirrored profile by re-integrating (u, u') cell by cell on a
/// uniform grid from the wall inward, so samples land exactly on grid
/// points. The wall slope determines the trajectory in every regime.
MemsSolution build_solution(double lambda, double eps, const NewtonResult& nr) {
  Membrane f{lambda, eps, 0.5 * guard_level(eps)};
  kn::VectorField vf = [&f](double, const double* y, double* dy) {
    dy[0] = y[1];
    dy[1] = f.lambda * f.g(y[0]);
  };
  kn::OdeOptions opts;
  opts.rel_tol = 1e-11;
  opts.abs_tol = 1e-13;

  const double h = 1.0 / kHalfCells;
  std::vector<double> uh(kHalfCells + 1), wh(kHalfCells + 1);
  std::array<double, 2> y = {0.0, -nr.w};
  uh[0] = y[0];
  wh[0] = y[1];
  for (int i = 0; i < kHalfCells; ++i) {
    const auto r =
        kn::integrate_ode(vf, 2, {i * h, (i + 1) * h}, y.data(), opts);
    if (r.status != kn::OdeStatus::Ok)
      throw NumericalError("SingularityHit",
                           "profile reconstruction left the admissible set");
    const double* yf = r.traj.state(r.traj.size() - 1);
    y = {yf[0], yf[1]};
    uh[static_cast<std::size_t>(i) + 1] = y[0];
    wh[static_cast<std::size_t>(i) + 1] = y[1];
  }

  MemsSolution sol;
  sol.lambda = lambda;
  sol.eps = eps;
  sol.u0 = uh[kHalfCells];
  sol.newton_residual = nr.residual;
  sol.newton_iters = nr.iters;
  const int n = 2 * kHalfCells + 1;
  sol.xs.resize(static_cast<std::size_t>(n));
  sol.us.resize(static_cast<std::size_t>(n));
  sol.ws.resize(static_cast<std::size_t>(n));
  for (int k = 0; k <= kHalfCells; ++k) {
    // Left half from the wall shot, right half mirrored.
    const auto j = static_cast<std::size_t>(k);
    const auto jm = static_cast<std::size_t>(2 * kHalfCells - k);
    sol.xs[j] = -1.0 + k * h;
    sol.xs[jm] = 1.0 - k * h;
    sol.us[j] = uh[j];
    sol.us[jm] = uh[j];
    sol.ws[j] = wh[j];
    sol.ws[jm] = -wh[j];
  }
  sol.wall_slope = std::abs(wh[0]);

  // Simpson weights on the uniform even-interval grid.
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ui = sol.us[static_cast<std::size_t>(i)];
    const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    s += w * ui * ui;
  }
  sol.norm_sq = s * h / 3.0;
  sol.tag = tag_for(eps, sol.u0);
  return sol;
}

struct Tangent {
  double d_lambda = 0.0;
  double d_w = 0.0;
};

/// Null direction of [dS/dlambda, dS/dw] for the wall residual S = u'(0).
Tangent tangent_from(const std::array<double, 6>& end) {
  Tangent t{end[3], -end[5]};
  const double n = std::hypot(t.d_lambda, t.d_w);
  if (n > 0.0) {
    t.d_lambda /= n;
    t.d_w /= n;
  }
  return t;
}

}  // namespace

const char* to_string(BranchTag t) {
  switch (t) {
    case BranchTag::Lower: return "Lower";
    case BranchTag::Middle: return "Middle";
    case BranchTag::Upper: return "Upper";
  }
  return "?";
}

const char* to_string(SsRegime r) {
  switch (r) {
    case SsRegime::I: return "I";
    case SsRegime::II: return "II";
    case SsRegime::III: return "III";
    case SsRegime::IV: return "IV";
  }
  return "?";
}

double mems_G(double u, double eps) {
  if (!(1.0 + u > 0.0))
    throw InputError("BadDeflection", "need 1 + u > 0");
  const double s = 1.0 + u;
  return -1.0 / s + (eps * eps) / (3.0 * s * s * s);
}

double mems_tau(double u0, double eps) {
  if (!(eps >= 0.0) || eps >= 1.0)
    throw InputError("BadEps", "eps must lie in [0, 1)");
  if (!(u0 > barrier(eps)) || !(u0 < 0.0))
    throw InputError("BadDeflection",
                     "center value must lie in (-1+eps, 0)");
  const double G0 = mems_G(u0, eps);
  const double a = -u0;  // span of the rise
  // Substitution u = u0 + a t^2 removes the inverse-sqrt endpoint.
  const auto integrand = [&](double t) {
    const double u = u0 + a * t * t;
    const double d = mems_G(u, eps) - G0;
    if (d <= 0.0) return 0.0;  // roundoff at the endpoint
    return 2.0 * a * t / std::sqrt(2.0 * d);
  };
  // Near the barrier equilibrium the integrand has a logarithmic layer of
  // width sqrt(2m/a), m the distance of u0 above the barrier: below it the
  // integrand is flat, above it decays like 1/t. Integrating decade by
  // decade keeps every piece well conditioned for arbitrarily small m.
  const double m = u0 - barrier(eps);
  double t_layer =
      std::sqrt(2.0 * std::max(m, 1e-290) / std::max(a, 1e-12));
  t_layer = std::clamp(t_layer, 1e-145, 0.875e-3);
  std::vector<double> breaks{0.0, t_layer};
  for (double t = 10.0 * t_layer; t < 1e-3; t *= 10.0) breaks.push_back(t);
  for (double t : {1e-3, 3e-2, 0.3, 1.0}) breaks.push_back(t);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    total += kn::integrate_adaptive(integrand, breaks[i], breaks[i + 1], 0.0,
                                    1e-11);
  return total;
}

double mems_lambda_of(double u0, double eps) {
  const double t = mems_tau(u0, eps);
  return t * t;
}

ShootResidual mems_residual(double lambda, double eps, double u0) {
  validate_pair(lambda, eps);
  if (!std::isfinite(u0) || u0 <= -1.0 || u0 >= 0.5)
    throw InputError("BadCenterGuess", "u0 must lie in (-1, 0.5)");
  ShootResidual out;
  if (1.0 + u0 <= guard_level(eps)) {
    out.singular = true;
    return out;
  }
  const ShotOutcome shot = shoot_center(lambda, eps, u0);
  out.singular = shot.singular;
  if (!shot.singular) {
    out.r = shot.end[0];
    out.dr_du0 = shot.end[2];
    out.dr_dlambda = shot.end[4];
  }
  return out;
}

WallResidual mems_residual_wall(double lambda, double eps, double w) {
  validate_pair(lambda, eps);
  if (!std::isfinite(w) || !(w > 0.0) || w > 100.0)
    throw InputError("BadWallSlope", "w must lie in (0, 100]");
  const ShotOutcome shot = shoot_wall(lambda, eps, w);
  WallResidual out;
  out.singular = shot.singular;
  if (!shot.singular) {
    out.r = shot.end[1];
    out.dr_dw = shot.end[3];
    out.dr_dlambda = shot.end[5];
  }
  return out;
}

MemsSolution mems_shoot(double lambda, double eps, double u0_guess) {
  validate_pair(lambda, eps);
  if (!std::isfinite(u0_guess) || u0_guess >= 0.5 || u0_guess <= -1.0)
    throw InputError("BadCenterGuess",
                     "u0_guess must lie in (-1, 0.5); physical solutions "
                     "have u(0) in (-1+eps, 0)");
  const double b = barrier(eps);
  if (u0_guess <= b) {
    // At or below the barrier equilibrium the trajectory can only dive.
    if (1.0 + u0_guess <= guard_level(eps))
      throw NumericalError(
          "SingularityHit",
          "initial center guess at or below the barrier guard");
    const ShotOutcome doomed = shoot_center(lambda, eps, u0_guess);
    if (doomed.singular)
      throw NumericalError("SingularityHit",
                           "integration from the initial guess reached "
                           "1 + u <= eps/2");
  }

  try {
    return build_solution(lambda, eps, newton_center(lambda, eps, u0_guess));
  } catch (const NumericalError& e) {
    if (e.code() != "NewtonDiverged" || u0_guess - b > 0.5 * (1.0 - eps))
      throw;
    // Deep target: the center distance of the root likely underflows.
    // Convert the guess through the conserved energy and finish in the
    // wall-slope parametrization.
    const double wg = std::sqrt(std::max(
        1e-24,
        2.0 * lambda * (mems_G(0.0, eps) - mems_G(u0_guess, eps))));
    return build_solution(lambda, eps, newton_wall(lambda, eps, wg));
  }
}

MemsSolution mems_shoot_wall(double lambda, double eps, double w_guess) {
  validate_pair(lambda, eps);
  if (!std::isfinite(w_guess) || !(w_guess > 0.0) || w_guess > 100.0)
    throw InputError("BadWallSlope", "w_guess must lie in (0, 100]");
  return build_solution(lambda, eps, newton_wall(lambda, eps, w_guess));
}

std::vector<MemsSolution> mems_multistart(double lambda, double eps,
                                          int n_starts) {
  validate_pair(lambda, eps);
  if (n_starts < 2 || n_starts > 100000)
    throw InputError("BadStartCount", "n_starts must lie in [2, 100000]");

  // Two families of starts: center guesses linear in the distance above the
  // barrier (shallow and intermediate leaves) and wall-slope guesses spread
  // up to the energy ceiling (deep leaf).
  const double b = barrier(eps);
  const double span = 1.0 - eps;
  const int n_center = (2 * n_starts + 2) / 3;
  const int n_wall = n_starts - n_center;
  const double w_max = w_ceiling(lambda, eps);

  std::vector<std::optional<MemsSolution>> slots(
      static_cast<std::size_t>(n_starts));
  kn::parallel_for(
      static_cast<std::size_t>(n_starts), kn::resolve_threads(),
      [&](std::size_t i) {
        try {
          if (i < static_cast<std::size_t>(n_center)) {
            const double frac = 0.02 + 0.96 * static_cast<double>(i) /
                                           std::max(1, n_center - 1);
            slots[i] = mems_shoot(lambda, eps, b + frac * span);
          } else {
            const auto j = static_cast<int>(i) - n_center;
            const double frac = 0.05 + 0.93 * static_cast<double>(j) /
                                           std::max(1, n_wall - 1);
            slots[i] = mems_shoot_wall(lambda, eps, frac * w_max);
          }
        } catch (const NumericalError&) {
          // Starts whose basin collapses into the barrier are skipped.
        }
      });

  std::vector<MemsSolution> found;
  for (auto& s : slots)
    if (s.has_value()) found.push_back(std::move(*s));
  std::sort(found.begin(), found.end(),
            [](const MemsSolution& a, const MemsSolution& c) {
              return a.u0 < c.u0;
            });
  std::vector<MemsSolution> distinct;
  for (auto& s : found) {
    bool dup = false;
    if (!distinct.empty()) {
      const auto& p = distinct.back();
      const double m_new = s.u0 - b, m_old = p.u0 - b;
      // Same root if the center values agree, or if both centers sit at the
      // representability floor (only one deep root exists per lambda).
      dup = (s.u0 - p.u0 < 1e-8 + 1e-6 * std::max(m_new, m_old)) ||
            (m_new < 1e-9 && m_old < 1e-9);
    }
    if (!dup) distinct.push_back(std::move(s));
  }
  // Shallowest first; with the generic three-leaf count, retag by order.
  std::reverse(distinct.begin(), distinct.end());
  if (distinct.size() == 3) {
    distinct[0].tag = BranchTag::Lower;
    distinct[1].tag = BranchTag::Middle;
    distinct[2].tag = BranchTag::Upper;
  }
  return distinct;
}

MemsBranch mems_branch(const BranchOptions& opts) {
  if (!(opts.lambda_start > 0.0))
    throw InputError("NonPositiveLambda", "lambda_start must be positive");
  if (!(opts.eps >= 0.0) || opts.eps >= 1.0)
    throw InputError("BadEps", "eps must lie in [0, 1)");
  if (opts.direction != 1 && opts.direction != -1)
    throw InputError("BadDirection", "direction must be +1 or -1");
  if (opts.n_steps < 1 || opts.n_steps > 100000)
    throw InputError("BadStepCount", "n_steps must lie in [1, 100000]");
  if (!(opts.lambda_min > 0.0) || !(opts.lambda_max > opts.lambda_min))
    throw InputError("BadLambdaWindow", "need 0 < lambda_min < lambda_max");
  if (!(opts.initial_step > 0.0) || opts.initial_step > 0.2)
    throw InputError("BadArcStep", "initial_step must lie in (0, 0.2]");

  const double eps = opts.eps;
  double u0g = opts.u0_guess;
  if (!std::isfinite(u0g))
    u0g = std::max(-0.45, -0.5 * opts.lambda_start * (1.0 - eps * eps));

  MemsBranch out;
  out.eps = eps;

  NewtonResult nr = newton_center_or_wall_entry(opts.lambda_start, eps, u0g);
  double lam = opts.lambda_start;
  double w = nr.w;
  out.solutions.push_back(build_solution(lam, eps, nr));

  ShotOutcome shot = shoot_wall(lam, eps, w);
  if (shot.singular)
    throw NumericalError("ContinuationStalled",
                         "starting solution not integrable from the wall");
  Tangent t = tangent_from(shot.end);
  if (opts.direction * t.d_lambda < 0.0) {
    t.d_lambda = -t.d_lambda;
    t.d_w = -t.d_w;
  }

  double h = opts.initial_step;
  int past_fold = -1;  // countdown once the first fold is behind us
  int flat_streak = 0;
  out.stop_reason = "steps";

  for (int step = 0; step < opts.n_steps; ++step) {
    const double lam_p = lam + h * t.d_lambda;
    const double w_p = w + h * t.d_w;

    double lc = lam_p, wc = w_p;
    std::array<double, 6> end{};
    bool ok = false;
    int iters_used = 0;
    for (int it = 0; it < 10; ++it) {
      lc = std::clamp(lc, 1e-6, 2.0);
      wc = std::clamp(wc, 1e-9, 50.0);
      const ShotOutcome so = shoot_wall(lc, eps, wc);
      if (so.singular) break;
      end = so.end;
      const double fn = t.d_lambda * (lc - lam_p) + t.d_w * (wc - w_p);
      if (std::abs(end[1]) < 1e-10 && std::abs(fn) < 1e-9) {
        ok = true;
        iters_used = it;
        break;
      }
      const double a = end[5];  // dS/dlambda
      const double bD = end[3]; // dS/dw
      const double c = t.d_lambda, d = t.d_w;
      const double det = a * d - bD * c;
      if (std::abs(det) < 1e-16) break;
      lc += (-end[1] * d - (-fn) * bD) / det;
      wc += (a * (-fn) - c * (-end[1])) / det;
    }

    if (!ok) {
      h *= 0.5;
      if (h < 1e-7) {
        if (out.solutions.size() >= 5) {
          out.stop_reason = "stalled";
          break;
        }
        throw NumericalError("ContinuationStalled",
                             "corrector made no progress at the minimum "
                             "arclength step near lambda = " +
                                 std::to_string(lam));
      }
      --step;  // retry this predictor at the smaller h
      continue;
    }

    Tangent tn = tangent_from(end);
    if (tn.d_lambda * t.d_lambda + tn.d_w * t.d_w < 0.0) {
      tn.d_lambda = -tn.d_lambda;
      tn.d_w = -tn.d_w;
    }

    // Genuine folds pass through d(lambda)/ds = 0 with O(h) flanks; deep on
    // the upper leaf the lambda component decays to noise instead, so tiny
    // flanks are not registered.
    if (t.d_lambda * tn.d_lambda < 0.0 &&
        std::max(std::abs(t.d_lambda), std::abs(tn.d_lambda)) > 1e-4) {
      const double w0 = std::abs(t.d_lambda);
      const double w1 = std::abs(tn.d_lambda);
      FoldPoint fp;
      fp.index = out.solutions.size() - 1;
      fp.lambda = lam + (lc - lam) * (w0 / (w0 + w1));
      fp.u0 = 0.0;  // filled from the interpolated solution below
      out.folds.push_back(fp);
      if (opts.stop_after_first_fold && past_fold < 0) past_fold = 12;
    }

    lam = lc;
    w = wc;
    t = tn;
    {
      NewtonResult nr2;
      nr2.w = w;
      nr2.u0 = end[0];
      nr2.residual = std::abs(end[1]);
      nr2.iters = iters_used;
      nr2.from_wall = true;
      out.solutions.push_back(build_solution(lam, eps, nr2));
      if (!out.folds.empty() &&
          out.folds.back().index + 1 == out.solutions.size() - 1 &&
          out.folds.back().u0 == 0.0) {
        const auto& a2 = out.solutions[out.folds.back().index];
        const auto& b2 = out.solutions.back();
        out.folds.back().u0 = 0.5 * (a2.u0 + b2.u0);
      }
    }

    if (iters_used <= 3) h = std::min(h * 1.4, 0.05);
    else if (iters_used >= 7) h = std::max(h * 0.6, 1e-7);

    if (lam <= opts.lambda_min || lam >= opts.lambda_max) {
      out.stop_reason = "lambda-window";
      break;
    }
    flat_streak = std::abs(end[3]) < 1e-9 ? flat_streak + 1 : 0;
    if (flat_streak >= 3) {
      out.stop_reason = "flat";
      break;
    }
    if (past_fold > 0 && --past_fold == 0) {
      out.stop_reason = "fold";
      break;
    }
  }
  return out;
}

MemsBranch mems_branch(double eps, double lambda_start, int direction,
                       int n_steps) {
  BranchOptions opts;
  opts.eps = eps;
  opts.lambda_start = lambda_start;
  opts.direction = direction;
  opts.n_steps = n_steps;
  return mems_branch(opts);
}

double mems_fold(double eps) {
  if (!(eps > 0.0) || eps > 0.2)
    throw InputError("BadEps",
                     "fold location needs eps in (0, 0.2]; the small "
                     "saddle-node scales like (3/4) eps");
  const double lambda_start = std::max(2.5 * eps, 0.02);
  const MemsSolution seed =
      mems_shoot_wall(lambda_start, eps, 0.97 * w_ceiling(lambda_start, eps));

  BranchOptions opts;
  opts.eps = eps;
  opts.lambda_start = lambda_start;
  opts.direction = -1;
  opts.n_steps = 4000;
  opts.u0_guess = seed.u0;
  opts.stop_after_first_fold = true;
  opts.lambda_min = 1e-5;
  opts.initial_step = std::clamp(0.15 * eps, 0.002, 0.02);
  const MemsBranch br = mems_branch(opts);
  if (br.folds.empty())
    throw NumericalError("FoldNotFound",
                         "continuation terminated (" + br.stop_reason +
                             ") without a tangent sign change");
  return br.folds.front().lambda;
}

SsRegime classify_ss(double eps, double delta, double eps0) {
  if (!(eps >= 0.0) || !(delta >= 0.0) || !std::isfinite(eps) ||
      !std::isfinite(delta))
    throw InputError("BadRegimePoint", "need eps >= 0 and delta >= 0");
  if (!(eps0 > 0.0))
    throw InputError("BadRegimePoint", "eps0 must be positive");
  const double top = 2.0 / std::sqrt(3.0);
  if (eps == 0.0 && delta == 0.0) return SsRegime::III;
  if (eps == 0.0 && delta < top) return SsRegime::II;
  if (eps > 0.0 && eps < eps0 && delta >= std::sqrt(eps) && delta <= top)
    return SsRegime::I;
  return SsRegime::IV;
}

}  // namespace dlimit::bvp
