#pragma once

// ============================================================================
// Sample-path machinery for slowly driven SDEs: confidence-strip escape
// probabilities, transition probabilities through (avoided) transcritical
// points, and the FitzHugh-Nagumo spiking-regime classifier.
//
// All estimators are Monte Carlo over Euler-Maruyama paths with per-path
// seeds derived from a base seed, so results are independent of the thread
// schedule. Exit conditions are checked at every step without interpolation;
// the resulting O(sqrt(step)) bias is part of the estimator definition.
// ============================================================================

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dlimit/types.hpp"

namespace dlimit::stochastic {

/// Monte-Carlo probability estimate with a Wilson 95% interval.
struct ProbEstimate {
  double p_hat = 0.0;          ///< point estimate k/n
  int n = 0;                   ///< path count
  double ci_lo = 0.0;          ///< Wilson interval, lower edge
  double ci_hi = 0.0;          ///< Wilson interval, upper edge
  std::uint64_t seed = 0;      ///< base seed the ensemble was derived from
};

/// Wilson 95% score interval for k successes out of n trials.
std::array<double, 2> wilson_ci(int k, int n);

/// A stable slow branch of dx = (1/eps) f(x,t) dt + (sigma/sqrt(eps)) dW:
/// the drift f, the slow solution x_bar(t) it admits, and the linearization
/// a(t) = df/dx at the slow solution (negative, bounded away from zero).
struct SfsBranch {
  std::function<double(double, double)> f;   ///< f(x, t)
  std::function<double(double)> x_bar;       ///< slow solution
  std::function<double(double)> a;           ///< linearization at x_bar
};

/// Canonical stable-branch instance f(x,t) = -x: x_bar = 0, a = -1.
SfsBranch sfs_stable_branch();

/// Probability that a path started on the slow solution at t = 0 leaves the
/// confidence strip |x - x_bar(t)| < h / sqrt(2|a(t)|) before t_end.
/// A path whose state stops being finite counts as escaped.
ProbEstimate escape_probability_strip(const SfsBranch& branch, double eps,
                                      double sigma, double h, double t_end,
                                      int n_paths, std::uint64_t base_seed);

/// Strip level h of order sigma*sqrt(2 log(t/(eps p))): the width that turns
/// the strip into a confidence strip at level p.
double confidence_strip_h(double sigma, double eps, double t, double p);

/// Probability that a path of dx = (1/eps)(t^2 - x^2 [+ delta]) dt
/// + (sigma/sqrt(eps)) dW, started on the stable slow solution at t0 < 0,
/// reaches x = -1 before t = 1. Without delta this is the transcritical
/// passage; with delta > 0 the branches avoid each other by 2 sqrt(delta).
ProbEstimate transition_probability_transcritical(
    double eps, double sigma, std::optional<double> delta, double t0,
    int n_paths, std::uint64_t base_seed);

/// Deterministic slow solution of the (avoided) transcritical drift at time
/// t0 < 0, computed by relaxing onto the attracting branch.
double transcritical_slow_solution(double eps, double delta, double t0);

/// Noise level at which the transcritical transition probability crosses
/// p_level, located by bisection in log(sigma) with n_paths fresh paths per
/// evaluation. Used to trace regime boundaries in the (eps, sigma) plane.
double transition_sigma_level(double eps, std::optional<double> delta,
                              double p_level, int n_paths,
                              std::uint64_t base_seed, int iters = 9);

/// FitzHugh-Nagumo equilibrium data: P* = (a, a^3 - a), the distance
/// parameter delta = (3a^2 - 1)/2, and the eigenvalues
/// (-delta +- sqrt(delta^2 - eps)) / eps of the linearization.
struct FhnEquilibrium {
  std::array<double, 2> p_star;
  double delta;
  std::complex<double> lambda_plus;
  std::complex<double> lambda_minus;
};

FhnEquilibrium fhn_equilibrium(double a, double eps);

/// Inverse of delta(a) = (3a^2 - 1)/2 on the excitable branch a > 0.
double fhn_a_from_delta(double delta);

enum class SpikeLabel { RareIsolated, Clusters, Repeated };
const char* to_string(SpikeLabel label);

/// Spiking statistics of one FitzHugh-Nagumo path.
struct SpikeStats {
  std::vector<double> spike_times;               ///< onset times (x down-crosses -0.8)
  std::vector<int> interspike_small_osc_counts;  ///< per-gap small-oscillation counts
  double respike_fraction = 0.0;   ///< fraction of gaps that are immediate respikes
  double respike_theory = 0.0;     ///< Phi(-eps^{1/4} (delta - sigma^2/eps) / sigma)
  int median_count = 0;            ///< median of the per-gap counts
  SpikeLabel label = SpikeLabel::Clusters;
};

/// Classifies the spiking pattern of one path of the stochastic
/// FitzHugh-Nagumo system with a = a(delta) on [0, t_end].
/// A spike starts when x drops below -0.8 and completes when x returns
/// above 0; an immediate respike follows within 2 slow-time units with at
/// most one small oscillation; a small oscillation is a local maximum of the
/// distance to P* with amplitude in (2 sigma, 0.3).
/// Labels: RareIsolated if the median count is >= 10 and the respike
/// fraction < 0.2; Repeated if the respike fraction > 0.8; else Clusters.
SpikeStats classify_fhn(double eps, double delta, double sigma, double t_end,
                        std::uint64_t base_seed);

}  // namespace dlimit::stochastic
