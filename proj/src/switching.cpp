#include "dlimit/switching.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dlimit/quadrature.hpp"
#include "dlimit/rng.hpp"
#include "dlimit/types.hpp"

namespace dlimit::switching {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::array<double, 2> mat_apply(const std::array<double, 4>& U,
                            const std::array<double, 2>& x) {
  return {U[0] * x[0] + U[1] * x[1], U[2] * x[0] + U[3] * x[1]};
}

/// Exact flow of a defective block: with N = U + delta*I nilpotent,
/// e^{U tau} x = e^{-delta tau} (x + tau N x).
std::array<double, 2> defective_exp_apply(const std::array<double, 4>& U,
                                          double delta, double tau,
                                          const std::array<double, 2>& x) {
  const std::array<double, 4> nil = {U[0] + delta, U[1], U[2], U[3] + delta};
  const auto nx = mat_apply(nil, x);
  const double scale = std::exp(-delta * tau);
  return {scale * (x[0] + tau * nx[0]), scale * (x[1] + tau * nx[1])};
}

/// Exact logistic flow for x' = r x (1 - x/p), written without growing
/// exponentials so arbitrarily long legs cannot overflow.
double logistic_flow(double x0, double r, double p, double tau) {
  if (x0 == 0.0) return 0.0;
  const double decay = std::exp(-r * tau);
  return p * x0 / (x0 + (p - x0) * decay);
}

double mode_rate_out(double eps, int mode) { return mode == 0 ? eps : 1.0; }

double logistic_mode_flow(double eps, double delta, int mode, double x0,
                          double tau) {
  (void)eps;
  return mode == 0 ? logistic_flow(x0, delta, 1.0, tau)
                   : logistic_flow(x0, 1.0, 2.0, tau);
}

}  // namespace

LinearSwitching linear_switching(double eps, double delta) {
  if (!(eps > 0.0) || !(delta >= 0.0))
    throw InputError("BadParams",
                     "linear_switching: need eps > 0 and delta >= 0");
  LinearSwitching sys;
  sys.eps = eps;
  sys.delta = delta;
  sys.U0 = {-delta, 1.0, 0.0, -delta};
  sys.U1 = {-delta, 0.0, -1.0, -delta};
  return sys;
}

double angular_drift(const std::array<double, 4>& U, double theta) {
  const std::array<double, 2> x = {std::cos(theta), std::sin(theta)};
  const auto w = mat_apply(U, x);
  return x[0] * w[1] - x[1] * w[0];
}

double radial_drift(const std::array<double, 4>& U, double theta) {
  const std::array<double, 2> x = {std::cos(theta), std::sin(theta)};
  const auto w = mat_apply(U, x);
  return x[0] * w[0] + x[1] * w[1];
}

double AngularDensity::cell_width() const { return kTwoPi / n_cells; }

double AngularDensity::theta_center(int k) const {
  return (k + 0.5) * cell_width();
}

AngularDensity stationary_angular_density(double eps, int n_cells) {
  if (!(eps > 0.0))
    throw InputError("BadParams",
                     "stationary_angular_density: need eps > 0");
  if (n_cells < 8 || n_cells > (1 << 20))
    throw InputError("BadParams",
                     "stationary_angular_density: need 8 <= n_cells <= 2^20");

  // The angular fields do not involve delta (the -delta*I part of each
  // matrix is radial), so any contraction gives the same density.
  const LinearSwitching sys = linear_switching(eps, 0.0);
  const std::array<const std::array<double, 4>*, 2> mats = {&sys.U0, &sys.U1};

  const int N = n_cells;
  const double h = kTwoPi / N;
  const double rate = 1.0 / eps;

  // Conservative upwind finite volumes on the master equation
  //   d/dtheta (v_i rho_i) = rate * (rho_{1-i} - rho_i),
  // with the (0,0) conservation row replaced by total mass one.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(8 * N + 2 * N));
  auto add = [&](int row, int col, double val) {
    if (row != 0) trips.emplace_back(row, col, val);
  };
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < N; ++k) {
      const int row = i * N + k;
      const int up = (k + 1) % N;
      const int dn = (k - 1 + N) % N;
      const double v_up = angular_drift(*mats[i], (k + 1) * h);
      const double v_dn = angular_drift(*mats[i], k * h);
      if (v_up >= 0.0)
        add(row, i * N + k, v_up);
      else
        add(row, i * N + up, v_up);
      if (v_dn >= 0.0)
        add(row, i * N + dn, -v_dn);
      else
        add(row, i * N + k, -v_dn);
      add(row, row, h * rate);
      add(row, (1 - i) * N + k, -h * rate);
    }
  }
  for (int c = 0; c < 2 * N; ++c) trips.emplace_back(0, c, h);

  Eigen::SparseMatrix<double> A(2 * N, 2 * N);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * N);
  rhs[0] = 1.0;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw NumericalError("SingularLinearSystem",
                         "stationary_angular_density: factorization failed");
  Eigen::VectorXd rho = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !rho.allFinite())
    throw NumericalError("SingularLinearSystem",
                         "stationary_angular_density: solve failed");

  const double floor = -1e-8 * rho.cwiseAbs().maxCoeff();
  if (rho.minCoeff() < floor)
    throw NumericalError("SingularLinearSystem",
                         "stationary_angular_density: negative density");
  rho = rho.cwiseMax(0.0);
  rho /= rho.sum() * h;

  AngularDensity out;
  out.n_cells = N;
  out.rho0.assign(rho.data(), rho.data() + N);
  out.rho1.assign(rho.data() + N, rho.data() + 2 * N);
  return out;
}

double threshold_G(double eps, int n_cells) {
  const AngularDensity d = stationary_angular_density(eps, n_cells);
  const double h = d.cell_width();
  double g = 0.0;
  for (int k = 0; k < d.n_cells; ++k) {
    const double th = d.theta_center(k);
    g += (d.rho0[static_cast<std::size_t>(k)] -
          d.rho1[static_cast<std::size_t>(k)]) *
         std::cos(th) * std::sin(th) * h;
  }
  return g;
}

const char* to_string(PdlLabel label) {
  switch (label) {
    case PdlLabel::Stable: return "Stable";
    case PdlLabel::Unstable: return "Unstable";
    case PdlLabel::Boundary: return "Boundary";
  }
  return "?";
}

PdlLabel classify_pdl(double eps, double delta, int n_cells) {
  if (!(delta >= 0.0))
    throw InputError("BadParams", "classify_pdl: need delta >= 0");
  const double g = threshold_G(eps, n_cells);
  if (std::abs(delta - g) < 1e-12) return PdlLabel::Boundary;
  return delta < g ? PdlLabel::Unstable : PdlLabel::Stable;
}

std::array<double, 2> pdl_flow(const LinearSwitching& sys, int mode,
                               double tau, const std::array<double, 2>& x) {
  if (mode != 0 && mode != 1)
    throw InputError("BadParams", "pdl_flow: mode must be 0 or 1");
  return defective_exp_apply(mode == 0 ? sys.U0 : sys.U1, sys.delta, tau, x);
}

kernel::SwitchingPath simulate_pdl(const LinearSwitching& sys,
                                   const std::array<double, 2>& x0, int mode0,
                                   double t_end, std::uint64_t seed) {
  if (mode0 != 0 && mode0 != 1)
    throw InputError("BadParams", "simulate_pdl: mode must be 0 or 1");
  if (!(t_end > 0.0))
    throw InputError("BadParams", "simulate_pdl: need t_end > 0");

  kernel::SwitchingPath out;
  out.seed = seed;
  out.traj.dim = 2;
  out.traj.integrator = "pdmp/exact-linear";

  kernel::Rng rng(seed);
  std::array<double, 2> x = x0;
  double t = 0.0;
  int mode = mode0;
  out.traj.push(t, x.data());
  out.modes.push_back(mode);

  const double rate = 1.0 / sys.eps;
  while (t < t_end) {
    const double tau = rng.exponential(rate);
    const double leg = std::min(tau, t_end - t);
    x = pdl_flow(sys, mode, leg, x);
    t += leg;
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) {
      out.status = kernel::OdeStatus::NonFiniteState;
      out.traj.push(t, x.data());
      out.modes.push_back(mode);
      return out;
    }
    out.traj.push(t, x.data());
    out.modes.push_back(mode);
    if (t >= t_end) break;
    const int target = 1 - mode;
    out.jumps.push_back({t, mode, target});
    mode = target;
    out.modes.back() = mode;
  }
  out.status = kernel::OdeStatus::Ok;
  return out;
}

LyapunovEstimate radial_lyapunov(const LinearSwitching& sys, double t_total,
                                 int n_reps, std::uint64_t base_seed) {
  if (!(t_total > 0.0))
    throw InputError("BadParams", "radial_lyapunov: need t_total > 0");
  if (n_reps < 2)
    throw InputError("BadParams", "radial_lyapunov: need n_reps >= 2");

  const double rate = 1.0 / sys.eps;
  std::vector<double> lambdas(static_cast<std::size_t>(n_reps), 0.0);
  for (int rep = 0; rep < n_reps; ++rep) {
    kernel::Rng rng(
        kernel::derive_seed(base_seed, static_cast<std::uint64_t>(rep)));
    const double th0 = kTwoPi * rng.uniform01();
    std::array<double, 2> u = {std::cos(th0), std::sin(th0)};
    int mode = rng.uniform01() < 0.5 ? 0 : 1;
    double t = 0.0;
    double log_norm = 0.0;
    while (t < t_total) {
      const double tau = rng.exponential(rate);
      const double leg = std::min(tau, t_total - t);
      // Split the scalar e^{-delta leg} off into log space so arbitrarily
      // long holds cannot underflow the state.
      const std::array<double, 4>& U = mode == 0 ? sys.U0 : sys.U1;
      const std::array<double, 4> nil = {U[0] + sys.delta, U[1], U[2],
                                         U[3] + sys.delta};
      const auto nx = mat_apply(nil, u);
      const std::array<double, 2> w = {u[0] + leg * nx[0], u[1] + leg * nx[1]};
      const double nrm = std::hypot(w[0], w[1]);
      log_norm += std::log(nrm) - sys.delta * leg;
      u = {w[0] / nrm, w[1] / nrm};
      t += leg;
      if (t < t_total) mode = 1 - mode;
    }
    lambdas[static_cast<std::size_t>(rep)] = log_norm / t_total;
  }

  LyapunovEstimate est;
  est.t_total = t_total;
  est.n_reps = n_reps;
  est.seed = base_seed;
  est.lambda = std::accumulate(lambdas.begin(), lambdas.end(), 0.0) / n_reps;
  double ss = 0.0;
  for (double l : lambdas) ss += (l - est.lambda) * (l - est.lambda);
  est.se = std::sqrt(ss / (n_reps - 1.0) / n_reps);
  est.p_pdl = est.lambda < 0.0 ? 1 : 0;
  return est;
}

double LogisticDensities::rho0(double x) const {
  if (!(x > 1.0) || !(x < 2.0)) return 0.0;
  return c1 * std::pow(x, -q - 2.0) * std::pow(x - 1.0, q - 1.0) * (2.0 - x);
}

double LogisticDensities::rho1(double x) const {
  if (!(x > 1.0) || !(x < 2.0)) return 0.0;
  return c2 * std::pow(x, -q - 2.0) * std::pow(x - 1.0, q);
}

LogisticDensities logistic_densities(double eps, double delta) {
  if (!(eps > 0.0) || !(delta > 0.0))
    throw InputError("BadParams",
                     "logistic_densities: need eps > 0 and delta > 0");
  const double q = eps / delta;
  if (q > 700.0)
    throw NumericalError("NormalizationFailure",
                         "logistic_densities: eps/delta too large to "
                         "normalize in double precision");

  // Substituting x = 1 + s^2 absorbs the (x-1)^{q-1} endpoint singularity:
  //   I = int_1^2 x^{-q-2} (x-1)^{q-1} (2-x) dx
  //     = int_0^1 2 (1+s^2)^{-q-2} s^{2q-1} (1-s^2) ds,
  //   J = int_1^2 x^{-q-2} (x-1)^q dx = int_0^1 2 (1+s^2)^{-q-2} s^{2q+1} ds.
  double i_int = 0.0, j_int = 0.0;
  try {
    i_int = kernel::integrate_adaptive(
        [q](double s) {
          return 2.0 * std::pow(1.0 + s * s, -q - 2.0) *
                 std::pow(s, 2.0 * q - 1.0) * (1.0 - s * s);
        },
        0.0, 1.0, 0.0, 1e-11);
    j_int = kernel::integrate_adaptive(
        [q](double s) {
          return 2.0 * std::pow(1.0 + s * s, -q - 2.0) *
                 std::pow(s, 2.0 * q + 1.0);
        },
        0.0, 1.0, 0.0, 1e-11);
  } catch (const NumericalError& err) {
    throw NumericalError("NormalizationFailure",
                         std::string("logistic_densities: ") + err.what());
  }

  const double denom = i_int + 2.0 * delta * j_int;
  if (!(denom > 0.0) || !std::isfinite(denom) || !std::isfinite(1.0 / denom))
    throw NumericalError("NormalizationFailure",
                         "logistic_densities: degenerate normalization");

  LogisticDensities d;
  d.eps = eps;
  d.delta = delta;
  d.q = q;
  d.c1 = 1.0 / denom;
  d.c2 = 2.0 * delta * d.c1;
  d.mass0 = d.c1 * i_int;
  d.mass1 = d.c2 * j_int;
  return d;
}

int classify_bdd(double eps, double delta) {
  if (!(eps > 0.0) || !(delta > 0.0))
    throw InputError("BadParams",
                     "classify_bdd: boundedness is defined only for "
                     "eps > 0 and delta > 0");
  return delta <= eps ? 1 : 0;
}

PdpStationary pdp_stationary(double eps, double delta) {
  if (!(eps >= 0.0) || !(delta >= 0.0))
    throw InputError("BadParams",
                     "pdp_stationary: need eps >= 0 and delta >= 0");
  PdpStationary out;
  if (eps > 0.0 && delta > 0.0) {
    out.kind = PdpStationary::Kind::Density;
    out.densities = logistic_densities(eps, delta);
    out.mode_mass = {out.densities->mass0, out.densities->mass1};
    out.p_bdd = classify_bdd(eps, delta);
  } else if (eps == 0.0 && delta > 0.0) {
    // No switching away from mode 0: all mass sits at its stable point.
    out.kind = PdpStationary::Kind::DiracAtOne;
    out.dirac_x = 1.0;
    out.mode_mass = {1.0, 0.0};
    out.p_bdd = -1;
  } else if (delta == 0.0 && eps > 0.0) {
    // Mode 0 freezes the state, mode 1 drives it to 2; the chain alone
    // determines the mode masses.
    out.kind = PdpStationary::Kind::DiracAtTwo;
    out.dirac_x = 2.0;
    out.mode_mass = {1.0 / (1.0 + eps), eps / (1.0 + eps)};
    out.p_bdd = -1;
  } else {
    out.kind = PdpStationary::Kind::DiracFamily;
    out.mode_mass = {1.0, 0.0};
    out.p_bdd = -1;
  }
  return out;
}

kernel::SwitchingPath simulate_pdp(double eps, double delta, double x0,
                                   int mode0, double t_end, std::uint64_t seed,
                                   double sample_dt) {
  if (!(eps >= 0.0) || !(delta >= 0.0))
    throw InputError("BadParams", "simulate_pdp: need eps, delta >= 0");
  if (!(x0 > 0.0))
    throw InputError("BadParams", "simulate_pdp: need x0 > 0");
  if (mode0 != 0 && mode0 != 1)
    throw InputError("BadParams", "simulate_pdp: mode must be 0 or 1");
  if (!(t_end > 0.0) || !(sample_dt > 0.0))
    throw InputError("BadParams", "simulate_pdp: need t_end, sample_dt > 0");

  kernel::SwitchingPath out;
  out.seed = seed;
  out.traj.dim = 1;
  out.traj.integrator = "pdmp/exact-logistic";

  kernel::Rng rng(seed);
  double x = x0;
  double t = 0.0;
  int mode = mode0;
  out.traj.push(t, &x);
  out.modes.push_back(mode);

  while (t < t_end) {
    const double tau = rng.exponential(mode_rate_out(eps, mode));
    const double leg = std::min(tau, t_end - t);
    const double x_start = x;
    // Subsample long legs with the exact flow evaluated from the leg start
    // so no integration error accumulates.
    double done = sample_dt;
    while (done < leg) {
      x = logistic_mode_flow(eps, delta, mode, x_start, done);
      out.traj.push(t + done, &x);
      out.modes.push_back(mode);
      done += sample_dt;
    }
    x = logistic_mode_flow(eps, delta, mode, x_start, leg);
    t += leg;
    out.traj.push(t, &x);
    out.modes.push_back(mode);
    if (t >= t_end) break;
    const int target = 1 - mode;
    out.jumps.push_back({t, mode, target});
    mode = target;
    out.modes.back() = mode;
  }
  out.status = kernel::OdeStatus::Ok;
  return out;
}

double OccupationHistogram::bin_center(int k) const {
  return 1.0 + (k + 0.5) / bins;
}

std::vector<double> OccupationHistogram::density() const {
  if (!(t_mode > 0.0))
    throw InputError("EmptyHistogram",
                     "occupation histogram holds no in-mode time; run a "
                     "longer path or lower the transient");
  std::vector<double> d(time_in_bin.size());
  const double width = 1.0 / bins;
  for (std::size_t k = 0; k < d.size(); ++k)
    d[k] = time_in_bin[k] / (t_mode * width);
  return d;
}

void accumulate_occupation(OccupationHistogram& hist,
                           const kernel::SwitchingPath& path, int mode,
                           double transient) {
  if (hist.bins < 2 || hist.time_in_bin.size() != static_cast<std::size_t>(hist.bins))
    throw InputError("BadParams", "accumulate_occupation: malformed histogram");
  if (path.traj.size() < 2) return;
  const double t_start = path.traj.times.front() + transient;
  const double width = 1.0 / hist.bins;

  for (std::size_t i = 0; i + 1 < path.traj.size(); ++i) {
    if (path.modes[i] != mode) continue;
    const double t0 = path.traj.times[i];
    const double t1 = path.traj.times[i + 1];
    if (t1 <= t_start || t1 <= t0) continue;
    double xa = path.traj.state(i)[0];
    const double xb = path.traj.state(i + 1)[0];
    double dt = t1 - t0;
    if (t0 < t_start) {
      xa += (xb - xa) * (t_start - t0) / (t1 - t0);
      dt = t1 - t_start;
    }

    const double lo = std::min(xa, xb);
    const double hi = std::max(xa, xb);
    const double clip_lo = std::max(lo, 1.0);
    const double clip_hi = std::min(hi, 2.0);
    if (hi - lo < 1e-14) {
      // (Numerically) static segment: all of dt lands in one bin.
      const double mid = 0.5 * (lo + hi);
      if (mid >= 1.0 && mid <= 2.0) {
        const int k = std::min(hist.bins - 1,
                               static_cast<int>((mid - 1.0) / width));
        hist.time_in_bin[static_cast<std::size_t>(k)] += dt;
        hist.t_mode += dt;
      }
      continue;
    }
    if (clip_hi <= clip_lo) continue;
    // Linear motion between samples: time is uniform in x across the span.
    const double dt_per_x = dt / (hi - lo);
    const int k_lo = std::max(0, static_cast<int>((clip_lo - 1.0) / width));
    const int k_hi = std::min(hist.bins - 1,
                              static_cast<int>((clip_hi - 1.0 - 1e-15) / width));
    for (int k = k_lo; k <= k_hi; ++k) {
      const double b_lo = 1.0 + k * width;
      const double b_hi = b_lo + width;
      const double overlap =
          std::min(clip_hi, b_hi) - std::max(clip_lo, b_lo);
      if (overlap > 0.0) {
        hist.time_in_bin[static_cast<std::size_t>(k)] += overlap * dt_per_x;
        hist.t_mode += overlap * dt_per_x;
      }
    }
  }
}

OccupationHistogram occupation_histogram(const kernel::SwitchingPath& path,
                                         int mode, int bins,
                                         double transient) {
  if (bins < 2 || bins > 100000)
    throw InputError("BadParams",
                     "occupation_histogram: need 2 <= bins <= 100000");
  if (!(transient >= 0.0))
    throw InputError("BadParams", "occupation_histogram: transient < 0");
  OccupationHistogram hist;
  hist.bins = bins;
  hist.time_in_bin.assign(static_cast<std::size_t>(bins), 0.0);
  accumulate_occupation(hist, path, mode, transient);
  return hist;
}

}  // namespace dlimit::switching
