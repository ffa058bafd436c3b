#pragma once

// ============================================================================
// Randomly switched systems: the defective-matrix linear switching pair with
// its angular stationary density and stability threshold G(eps), and the
// logistic switching system with closed-form invariant densities, the
// boundedness dichotomy, exact-flow simulation, and occupation histograms.
// ============================================================================

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dlimit/pdmp.hpp"

namespace dlimit::switching {

/// Random switching at symmetric rate 1/eps between two linear fields
/// x' = U_i x whose matrices share the sole eigenvalue -delta with a
/// one-dimensional eigenspace (both are defective by construction).
struct LinearSwitching {
  double eps = 0.0;    ///< inverse switching rate
  double delta = 0.0;  ///< contraction of each individual mode
  std::array<double, 4> U0{};  ///< row-major 2x2, {{-delta, 1}, {0, -delta}}
  std::array<double, 4> U1{};  ///< row-major 2x2, {{-delta, 0}, {-1, -delta}}
};

/// Validates eps > 0, delta >= 0 and fills in the fixed matrices.
LinearSwitching linear_switching(double eps, double delta);

/// Angular velocity of the unit-circle projection of x' = U x at angle
/// theta, derived from the polar decomposition (not hard-coded), so the
/// sign convention follows from the matrices themselves.
double angular_drift(const std::array<double, 4>& U, double theta);

/// Logarithmic radial velocity d(log r)/dt of x' = U x at angle theta.
double radial_drift(const std::array<double, 4>& U, double theta);

/// Stationary density of the angular two-component process on S^1 x {0,1},
/// stored as cell averages over a uniform N-cell grid on [0, 2*pi). The
/// density depends on eps only; the contraction delta drops out of the
/// angular dynamics identically.
struct AngularDensity {
  int n_cells = 0;
  std::vector<double> rho0;  ///< cell averages, mode 0
  std::vector<double> rho1;  ///< cell averages, mode 1
  double cell_width() const;
  double theta_center(int k) const;
};

/// Solves the stationary master equation with a conservative upwind
/// finite-volume scheme, periodic closure, and total mass one.
/// Throws NumericalError("SingularLinearSystem") if the solve degenerates.
AngularDensity stationary_angular_density(double eps, int n_cells);

/// Stability threshold G(eps) = integral of (rho0 - rho1) cos sin over S^1,
/// evaluated by the periodic trapezoid rule on the cell centers.
double threshold_G(double eps, int n_cells = 2048);

enum class PdlLabel { Stable, Unstable, Boundary };
const char* to_string(PdlLabel label);

/// Unstable iff delta < G(eps), Stable iff delta > G(eps); ties within
/// 1e-12 report Boundary.
PdlLabel classify_pdl(double eps, double delta, int n_cells = 2048);

/// Exact mode flow e^{U_i tau} x of the defective blocks (closed form).
std::array<double, 2> pdl_flow(const LinearSwitching& sys, int mode,
                               double tau, const std::array<double, 2>& x);

/// Switching trajectory of the linear pair with exact mode flows; samples
/// are taken at jump times only, so the jump log replays the endpoint.
kernel::SwitchingPath simulate_pdl(const LinearSwitching& sys,
                                   const std::array<double, 2>& x0, int mode0,
                                   double t_end, std::uint64_t seed);

/// Monte Carlo estimate of the top Lyapunov exponent of the radial process.
struct LyapunovEstimate {
  double lambda = 0.0;  ///< mean of log||X_T|| / T over replicates
  double se = 0.0;      ///< standard error of the mean
  double t_total = 0.0;
  int n_reps = 0;
  int p_pdl = 0;  ///< 1 iff lambda < 0 (almost-sure decay)
  std::uint64_t seed = 0;
};

/// Each replicate starts on a random angle, alternates exact mode flows with
/// exponential holding times of rate 1/eps, and accumulates the log-norm
/// with per-leg renormalization so no overflow can occur.
LyapunovEstimate radial_lyapunov(const LinearSwitching& sys, double t_total,
                                 int n_reps, std::uint64_t base_seed);

/// Closed-form stationary densities of the logistic switching system on
/// (1,2), with q = eps/delta:
///   rho0(x) = c1 x^{-q-2} (x-1)^{q-1} (2-x),
///   rho1(x) = c2 x^{-q-2} (x-1)^q.
/// The flux balance of the two modes forces c2 = 2 delta c1, and total mass
/// one fixes c1; rho1 is bounded for every parameter choice, while rho0 is
/// bounded iff delta <= eps.
struct LogisticDensities {
  double eps = 0.0;
  double delta = 0.0;
  double q = 0.0;      ///< eps / delta
  double c1 = 0.0;
  double c2 = 0.0;     ///< = 2 delta c1
  double mass0 = 0.0;  ///< integral of rho0 over (1,2)
  double mass1 = 0.0;  ///< integral of rho1 over (1,2)
  double rho0(double x) const;  ///< 0 outside (1,2)
  double rho1(double x) const;  ///< 0 outside (1,2)
};

/// Normalizes by adaptive quadrature with the substitution x = 1 + s^2
/// absorbing the endpoint singularity at x = 1.
/// Throws NumericalError("NormalizationFailure") if the constants cannot be
/// represented or the quadrature fails.
LogisticDensities logistic_densities(double eps, double delta);

/// Boundedness dichotomy for rho0: 1 iff delta <= eps (the ray delta = eps
/// included), 0 otherwise. Requires eps, delta > 0.
int classify_bdd(double eps, double delta);

/// Stationary description of the logistic switching system including the
/// degenerate axes, where the stationary distribution collapses to Dirac
/// measures and the boundedness property is no longer defined.
struct PdpStationary {
  enum class Kind {
    Density,      ///< eps, delta > 0: absolutely continuous on (1,2)
    DiracAtOne,   ///< eps = 0, delta > 0: point mass at x = 1, mode 0
    DiracAtTwo,   ///< delta = 0, eps > 0: point mass at x = 2
    DiracFamily,  ///< eps = delta = 0: a Dirac at every x > 0, mode 0
  };
  Kind kind = Kind::Density;
  std::optional<LogisticDensities> densities;  ///< set for Kind::Density
  std::optional<double> dirac_x;               ///< set for the single-Dirac kinds
  std::array<double, 2> mode_mass{};           ///< stationary mass per mode
  int p_bdd = -1;  ///< 1 bounded, 0 unbounded, -1 not defined
};

PdpStationary pdp_stationary(double eps, double delta);

/// Switching trajectory of the logistic pair (rates eps away from mode 0 and
/// 1 away from mode 1) using the exact logistic flows; legs longer than
/// sample_dt are subsampled so occupation statistics resolve the motion.
kernel::SwitchingPath simulate_pdp(double eps, double delta, double x0,
                                   int mode0, double t_end, std::uint64_t seed,
                                   double sample_dt = 0.1);

/// Time-weighted occupation histogram on (1,2) for one mode. Segment times
/// are distributed across bins by linear interpolation between samples; the
/// empirical conditional density integrates to one.
struct OccupationHistogram {
  int bins = 0;
  double t_mode = 0.0;  ///< accumulated time in the mode inside (1,2)
  std::vector<double> time_in_bin;
  double bin_center(int k) const;
  std::vector<double> density() const;
};

/// Histogram of a single path after discarding the initial transient.
OccupationHistogram occupation_histogram(const kernel::SwitchingPath& path,
                                         int mode, int bins,
                                         double transient = 0.0);

/// Merges another path into an existing histogram (for chunked long runs).
void accumulate_occupation(OccupationHistogram& hist,
                           const kernel::SwitchingPath& path, int mode,
                           double transient = 0.0);

}  // namespace dlimit::switching
