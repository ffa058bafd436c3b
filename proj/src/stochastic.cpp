#include "dlimit/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dlimit/parallel.hpp"
#include "dlimit/rng.hpp"
#include "dlimit/sde.hpp"

namespace dlimit::stochastic {

namespace {

/// Standard normal CDF.
double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Shared ensemble scaffold: runs one indicator-valued experiment per path
/// with schedule-independent per-path seeds and returns the Wilson estimate.
ProbEstimate run_ensemble(int n_paths, std::uint64_t base_seed,
                          const std::function<bool(kernel::Rng&)>& experiment) {
  std::vector<char> hit(static_cast<std::size_t>(n_paths), 0);
  kernel::parallel_for(static_cast<std::size_t>(n_paths),
                       kernel::resolve_threads(), [&](std::size_t i) {
                         kernel::Rng rng(kernel::derive_seed(base_seed, i));
                         hit[i] = experiment(rng) ? 1 : 0;
                       });
  int k = 0;
  for (char c : hit) k += c;
  ProbEstimate est;
  est.p_hat = static_cast<double>(k) / static_cast<double>(n_paths);
  est.n = n_paths;
  const auto ci = wilson_ci(k, n_paths);
  est.ci_lo = ci[0];
  est.ci_hi = ci[1];
  est.seed = base_seed;
  return est;
}

}  // namespace

std::array<double, 2> wilson_ci(int k, int n) {
  if (n <= 0 || k < 0 || k > n)
    throw InputError("BadCount", "wilson_ci: need 0 <= k <= n, n > 0");
  const double z = 1.959963984540054;  // 97.5% normal quantile
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

SfsBranch sfs_stable_branch() {
  SfsBranch b;
  b.f = [](double x, double) { return -x; };
  b.x_bar = [](double) { return 0.0; };
  b.a = [](double) { return -1.0; };
  return b;
}

double confidence_strip_h(double sigma, double eps, double t, double p) {
  if (!(sigma > 0.0) || !(eps > 0.0) || !(t > 0.0) || !(p > 0.0) || !(p < 1.0))
    throw InputError("BadStripArgs",
                     "confidence_strip_h: need sigma, eps, t > 0 and p in (0,1)");
  const double ratio = t / (eps * p);
  if (!(ratio > 1.0))
    throw InputError("BadStripArgs",
                     "confidence_strip_h: t/(eps*p) must exceed 1");
  return sigma * std::sqrt(2.0 * std::log(ratio));
}

ProbEstimate escape_probability_strip(const SfsBranch& branch, double eps,
                                      double sigma, double h, double t_end,
                                      int n_paths, std::uint64_t base_seed) {
  if (!branch.f || !branch.x_bar || !branch.a)
    throw InputError("BadBranch", "escape_probability_strip: branch callables unset");
  if (!(eps > 0.0) || !(sigma >= 0.0) || !(h > 0.0) || !(t_end > 0.0))
    throw InputError("BadStripArgs",
                     "escape_probability_strip: need eps, h, t_end > 0 and sigma >= 0");
  if (n_paths < 100)
    throw InputError("TooFewPaths",
                     "escape_probability_strip: need n_paths >= 100");
  if (!(branch.a(0.0) < 0.0))
    throw InputError("BadBranch",
                     "escape_probability_strip: linearization a(0) must be negative");

  const double step = eps / 16.0;
  const double g = sigma / std::sqrt(eps);
  const kernel::VectorField drift = [&](double t, const double* y, double* out) {
    out[0] = branch.f(y[0], t) / eps;
  };
  const kernel::DiffusionField diffusion = [g](double, const double*, double* out) {
    out[0] = g;
  };

  return run_ensemble(n_paths, base_seed, [&](kernel::Rng& rng) {
    double x = branch.x_bar(0.0);
    bool escaped = false;
    const auto status = kernel::sde_run(
        drift, diffusion, 1, 1, {0.0, t_end}, &x, step,
        kernel::SdeScheme::EulerMaruyama, rng, [&](double t, const double* y) {
          const double a = branch.a(t);
          const double half_width = h / std::sqrt(2.0 * std::abs(a));
          if (std::abs(y[0] - branch.x_bar(t)) >= half_width) {
            escaped = true;
            return false;
          }
          return true;
        });
    return escaped || status == kernel::OdeStatus::NonFiniteState;
  });
}

double transcritical_slow_solution(double eps, double delta, double t0) {
  if (!(eps > 0.0) || !(delta >= 0.0))
    throw InputError("BadParams",
                     "transcritical_slow_solution: need eps > 0, delta >= 0");
  if (!(t0 < 0.0) || !(t0 >= -10.0))
    throw InputError("BadParams",
                     "transcritical_slow_solution: need t0 in [-10, 0)");
  // Relax onto the attracting branch: start on sqrt(t^2 + delta) half a unit
  // early and integrate the deterministic drift with the same explicit-Euler
  // stepping the path ensembles use. The memory of the start point decays
  // like exp(-span * 2|x|/eps), which is far below double precision here.
  const double t_start = t0 - 0.5;
  const double dt = eps / 16.0;
  double x = std::sqrt(t_start * t_start + delta);
  const auto n_steps =
      static_cast<long long>(std::ceil((t0 - t_start) / dt - 1e-9));
  double t = t_start;
  for (long long n = 0; n < n_steps; ++n) {
    const double h = std::min(dt, t0 - t);
    x += h * (t * t - x * x + delta) / eps;
    t = (n + 1 == n_steps) ? t0 : t_start + dt * static_cast<double>(n + 1);
  }
  return x;
}

ProbEstimate transition_probability_transcritical(
    double eps, double sigma, std::optional<double> delta, double t0,
    int n_paths, std::uint64_t base_seed) {
  if (!(eps > 0.0) || !(sigma >= 0.0))
    throw InputError("BadParams",
                     "transition_probability_transcritical: need eps > 0, sigma >= 0");
  if (delta && !(*delta >= 0.0))
    throw InputError("BadParams",
                     "transition_probability_transcritical: delta must be >= 0");
  if (!(t0 < 0.0) || !(t0 >= -10.0))
    throw InputError("BadParams",
                     "transition_probability_transcritical: need t0 in [-10, 0)");
  if (n_paths < 100)
    throw InputError("TooFewPaths",
                     "transition_probability_transcritical: need n_paths >= 100");

  const double dlt = delta.value_or(0.0);
  const double x0 = transcritical_slow_solution(eps, dlt, t0);
  const double step = eps / 16.0;
  const double g = sigma / std::sqrt(eps);
  const kernel::VectorField drift = [eps, dlt](double t, const double* y,
                                               double* out) {
    out[0] = (t * t - y[0] * y[0] + dlt) / eps;
  };
  const kernel::DiffusionField diffusion = [g](double, const double*, double* out) {
    out[0] = g;
  };

  return run_ensemble(n_paths, base_seed, [&](kernel::Rng& rng) {
    double x = x0;
    bool transitioned = false;
    const auto status = kernel::sde_run(
        drift, diffusion, 1, 1, {t0, 1.0}, &x, step,
        kernel::SdeScheme::EulerMaruyama, rng, [&](double, const double* y) {
          if (y[0] <= -1.0) {
            transitioned = true;
            return false;
          }
          return true;
        });
    // The only non-finite route is the downward blow-up past the unstable
    // branch, so a non-finite abort counts as a completed transition.
    return transitioned || status == kernel::OdeStatus::NonFiniteState;
  });
}

double transition_sigma_level(double eps, std::optional<double> delta,
                              double p_level, int n_paths,
                              std::uint64_t base_seed, int iters) {
  if (!(p_level > 0.0) || !(p_level < 1.0))
    throw InputError("BadParams", "transition_sigma_level: need p_level in (0,1)");
  if (iters < 1 || iters > 60)
    throw InputError("BadParams", "transition_sigma_level: need 1 <= iters <= 60");
  const double scale = std::pow(std::max(eps, delta.value_or(0.0)), 0.75);
  double lo = 0.25 * scale, hi = 16.0 * scale;
  std::uint64_t k = 0;
  const auto p_at = [&](double sigma) {
    return transition_probability_transcritical(eps, sigma, delta, -1.0, n_paths,
                                                kernel::derive_seed(base_seed, k++))
        .p_hat;
  };
  // Expand the bracket if the crossing is not inside it.
  for (int tries = 0; p_at(lo) >= p_level; ++tries) {
    if (tries == 6)
      throw NumericalError("NoBracket",
                           "transition_sigma_level: p exceeds p_level at the "
                           "smallest bracketed sigma");
    lo *= 0.25;
  }
  for (int tries = 0; p_at(hi) <= p_level; ++tries) {
    if (tries == 6)
      throw NumericalError("NoBracket",
                           "transition_sigma_level: p below p_level at the "
                           "largest bracketed sigma");
    hi *= 4.0;
  }
  for (int i = 0; i < iters; ++i) {
    const double mid = std::sqrt(lo * hi);
    (p_at(mid) < p_level ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

FhnEquilibrium fhn_equilibrium(double a, double eps) {
  if (!(eps > 0.0)) throw InputError("BadParams", "fhn_equilibrium: need eps > 0");
  FhnEquilibrium eq;
  eq.p_star = {a, a * a * a - a};
  eq.delta = (3.0 * a * a - 1.0) / 2.0;
  const std::complex<double> disc(eq.delta * eq.delta - eps, 0.0);
  const std::complex<double> root = std::sqrt(disc);
  eq.lambda_plus = (-eq.delta + root) / eps;
  eq.lambda_minus = (-eq.delta - root) / eps;
  return eq;
}

double fhn_a_from_delta(double delta) {
  if (!(delta > -0.5))
    throw InputError("BadParams", "fhn_a_from_delta: need delta > -1/2");
  return std::sqrt((2.0 * delta + 1.0) / 3.0);
}

const char* to_string(SpikeLabel label) {
  switch (label) {
    case SpikeLabel::RareIsolated: return "RareIsolated";
    case SpikeLabel::Clusters: return "Clusters";
    case SpikeLabel::Repeated: return "Repeated";
  }
  return "?";
}

namespace {

/// Streaming peak counter with two-sided prominence and an amplitude window:
/// a peak is confirmed once the series has risen at least `prom` above the
/// preceding valley and fallen at least `prom` below the running maximum.
struct PeakCounter {
  double prom;
  double amp_lo;
  double amp_hi;
  int count = 0;
  double valley = std::numeric_limits<double>::infinity();
  double cand = 0.0;
  bool have_cand = false;

  void reset() {
    count = 0;
    valley = std::numeric_limits<double>::infinity();
    have_cand = false;
  }

  void feed(double v) {
    if (!have_cand) {
      valley = std::min(valley, v);
      if (v >= valley + prom) {
        have_cand = true;
        cand = v;
      }
    } else {
      cand = std::max(cand, v);
      if (cand - v >= prom) {
        if (cand > amp_lo && cand < amp_hi) ++count;
        valley = v;
        have_cand = false;
      }
    }
  }
};

}  // namespace

SpikeStats classify_fhn(double eps, double delta, double sigma, double t_end,
                        std::uint64_t base_seed) {
  if (!(eps > 0.0) || !(delta > 0.0) || !(sigma > 0.0))
    throw InputError("BadParams", "classify_fhn: need eps, delta, sigma > 0");
  if (!(t_end > 1.0))
    throw InputError("BadParams", "classify_fhn: need t_end > 1");

  const double a = fhn_a_from_delta(delta);
  const double y_star = a * a * a - a;
  const double step = eps / 20.0;
  const double gx = sigma / std::sqrt(eps);

  const kernel::VectorField drift = [eps, a](double, const double* y, double* out) {
    out[0] = (y[0] - y[0] * y[0] * y[0] + y[1]) / eps;
    out[1] = a - y[0];
  };
  // Column-major 2x2 diffusion: dW1 drives x, dW2 drives y.
  const kernel::DiffusionField diffusion = [gx, sigma](double, const double*,
                                                       double* out) {
    out[0] = gx;
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = sigma;
  };

  // Spike bookkeeping. Onset: x down-crosses -0.8 while quiet. Completion:
  // x returns above 0, after which the path is still reinjecting along the
  // right branch; the rest state counts as reached once the distance to P*
  // drops below r0. Small oscillations are prominence-sigma/2 peaks of the
  // window-averaged distance to P* with amplitude in (2 sigma, 0.3), counted
  // around P* only (from rest-state re-entry to the next onset), so that
  // noise jitter on the deterministic reinjection slide is not mistaken for
  // oscillations. The inter-spike gap is measured from the same re-entry; a
  // path that spikes again before ever reaching the rest state is an
  // immediate respike with zero oscillations.
  SpikeStats stats;
  stats.respike_theory =
      phi_cdf(-std::pow(eps, 0.25) * (delta - sigma * sigma / eps) / sigma);

  // Distance samples are averaged over a quarter of the linearized rotation
  // period around P* (when P* is a focus) so that the peak counter sees
  // genuine rotation maxima rather than per-step noise jitter.
  const double disc = eps - delta * delta;
  const double quarter_rotation =
      disc > 0.0 ? 0.25 * 2.0 * M_PI * eps / std::sqrt(disc) : 0.05;
  const double sample_window = std::max(quarter_rotation, 4.0 * step);
  const auto steps_per_sample =
      std::max<long long>(1, std::llround(sample_window / step));
  const double rest_radius = 0.1;
  PeakCounter peaks{sigma / 2.0, 2.0 * sigma, 0.3};

  enum class Phase { Quiet, Spiking, Returning };
  Phase phase = Phase::Quiet;
  double prev_x = a;
  double last_rest_entry = 0.0;
  bool have_rest_entry = false;  // a spike has completed and P* was reached
  double last_completion = 0.0;
  std::vector<double> gap_lengths;
  double window_sum = 0.0;
  long long window_n = 0;

  double y[2] = {a, y_star};
  kernel::Rng rng(kernel::derive_seed(base_seed, 0));
  const auto status = kernel::sde_run(
      drift, diffusion, 2, 2, {0.0, t_end}, y, step,
      kernel::SdeScheme::EulerMaruyama, rng, [&](double t, const double* yy) {
        const double x = yy[0];
        const double dx = x - a;
        const double dy = yy[1] - y_star;
        const double dist = std::sqrt(dx * dx + dy * dy);
        switch (phase) {
          case Phase::Quiet:
            if (prev_x > -0.8 && x <= -0.8) {
              if (have_rest_entry) {
                gap_lengths.push_back(t - last_rest_entry);
                stats.interspike_small_osc_counts.push_back(peaks.count);
              }
              stats.spike_times.push_back(t);
              phase = Phase::Spiking;
            } else {
              window_sum += dist;
              if (++window_n == steps_per_sample) {
                peaks.feed(window_sum / static_cast<double>(window_n));
                window_sum = 0.0;
                window_n = 0;
              }
            }
            break;
          case Phase::Spiking:
            if (x >= 0.0) {
              phase = Phase::Returning;
              last_completion = t;
            }
            break;
          case Phase::Returning:
            if (x <= -0.8) {
              // Re-spiked without ever reaching the rest state: an immediate
              // respike with no small oscillations in between.
              gap_lengths.push_back(t - last_completion);
              stats.interspike_small_osc_counts.push_back(0);
              stats.spike_times.push_back(t);
              phase = Phase::Spiking;
            } else if (dist < rest_radius) {
              phase = Phase::Quiet;
              last_rest_entry = t;
              have_rest_entry = true;
              window_sum = 0.0;
              window_n = 0;
              peaks.reset();
            }
            break;
        }
        prev_x = x;
        return true;
      });
  if (status != kernel::OdeStatus::Ok)
    throw NumericalError("NonFinitePath",
                         "classify_fhn: sample path left the finite range");
  if (stats.spike_times.size() < 2)
    throw NumericalError("NoSpikes",
                         "classify_fhn: fewer than two spikes before t_end; "
                         "increase t_end or sigma");

  const auto& counts = stats.interspike_small_osc_counts;
  std::vector<int> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  stats.median_count = sorted[(sorted.size() - 1) / 2];

  int respikes = 0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (gap_lengths[i] <= 2.0 && counts[i] <= 1) ++respikes;
  stats.respike_fraction =
      static_cast<double>(respikes) / static_cast<double>(counts.size());

  if (stats.median_count >= 10 && stats.respike_fraction < 0.2)
    stats.label = SpikeLabel::RareIsolated;
  else if (stats.respike_fraction > 0.8)
    stats.label = SpikeLabel::Repeated;
  else
    stats.label = SpikeLabel::Clusters;
  return stats;
}

}  // namespace dlimit::stochastic
