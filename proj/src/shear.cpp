#include "dlimit/shear.hpp"

#include <cmath>
#include <vector>

#include "dlimit/parallel.hpp"
#include "dlimit/quadrature.hpp"
#include "dlimit/rng.hpp"
#include "dlimit/sde.hpp"

namespace dlimit::shear {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// E[v] for the amplitude-equation stationary density, density proportional
/// to v^{-1/2} exp(g(v)), g(v) = -(bs/6) v^3 + (alpha^2/(2 bs)) v, bs > 0.
/// Uses v = s^2 to remove the endpoint singularity and weights exp(g - g*)
/// so the integrands stay in [0, 1] for any parameter magnitudes.
double mean_v(double alpha, double bs) {
  const double lin = alpha * alpha / (2.0 * bs);
  const double g_star = alpha > 0.0 ? alpha * alpha * alpha / (3.0 * bs * bs) : 0.0;
  auto weight = [&](double s) {
    const double v = s * s;
    return std::exp(-(bs / 6.0) * v * v * v + lin * v - g_star);
  };
  auto f_den = [&](double s) { return 2.0 * weight(s); };
  auto f_num = [&](double s) { return 2.0 * s * s * weight(s); };

  // enlarge [0, V] until the analytic tail bound is negligible
  double v_cut = std::max(2.0 * alpha / bs, 1.0);
  for (int attempt = 0; attempt < 60; ++attempt) {
    const double s_cut = std::sqrt(v_cut);
    const double rate = bs * std::pow(s_cut, 5) - (alpha * alpha / bs) * s_cut;
    if (rate > 0.0) {
      const double i_den = kernel::integrate_adaptive(f_den, 0.0, s_cut, 0.0, 1e-12);
      const double i_num = kernel::integrate_adaptive(f_num, 0.0, s_cut, 0.0, 1e-12);
      const double tail_den = f_den(s_cut) / rate;
      const double tail_num = f_num(s_cut) / rate;
      if (tail_den <= 1e-14 * i_den && tail_num <= 1e-14 * i_num)
        return i_num / i_den;
    }
    v_cut *= 2.0;
  }
  throw NumericalError("QuadratureNonConvergent",
                       "mean_v: tail did not stabilize for alpha=" +
                           std::to_string(alpha) + ", b*sigma=" + std::to_string(bs));
}

struct RepStats {
  double lambda1 = 0.0;
  double mean_div = 0.0;
};

/// Tangent-growth exponent of one path: burn-in without accounting, then
/// accumulate log-norms of the tangent block (components 2, 3), renormalizing
/// every renorm_dt time units. div_fn, when given, is time-averaged along the
/// accumulation window.
RepStats one_rep(const kernel::VectorField& drift,
                 const kernel::DiffusionField& diffusion, int noise_dim,
                 double* y, double t_burn, double t_total, double dt,
                 std::uint64_t seed,
                 const std::function<double(const double*)>& div_fn) {
  kernel::Rng rng(seed);
  const double renorm_dt = 0.5;
  const auto renorm_every = static_cast<long long>(std::llround(renorm_dt / dt));

  double sum_log = 0.0, sum_div = 0.0;
  long long step_count = 0;
  auto renormalize = [&](bool account) {
    const double n = std::hypot(y[2], y[3]);
    if (account) sum_log += std::log(n);
    y[2] /= n;
    y[3] /= n;
  };

  auto phase = [&](double t0, double t1, bool account) {
    step_count = 0;
    auto status = kernel::sde_run(
        drift, diffusion, 4, noise_dim, {t0, t1}, y, dt,
        kernel::SdeScheme::HeunStratonovich, rng, [&](double, const double* yy) {
          if (account && div_fn) sum_div += div_fn(yy) * dt;
          if (++step_count % renorm_every == 0) renormalize(account);
          return true;
        });
    if (status != kernel::OdeStatus::Ok)
      throw NumericalError("NonFiniteState",
                           "mc_lyapunov: path left the finite domain");
  };

  phase(0.0, t_burn, false);
  renormalize(false);
  phase(t_burn, t_burn + t_total, true);
  renormalize(true);
  return {sum_log / t_total, sum_div / t_total};
}

LyapPair mc_reduce(const std::vector<RepStats>& reps, bool trace_rule,
                   double alpha) {
  const auto n = static_cast<double>(reps.size());
  double mean = 0.0, mean_div = 0.0;
  for (const auto& r : reps) {
    mean += r.lambda1 / n;
    mean_div += r.mean_div / n;
  }
  double var = 0.0;
  for (const auto& r : reps) var += (r.lambda1 - mean) * (r.lambda1 - mean);
  LyapPair out;
  out.lambda1 = mean;
  out.lambda2 = trace_rule ? -alpha - mean : mean_div - mean;
  out.method = LyapMethod::MonteCarlo;
  out.se = std::sqrt(var / (n * (n - 1.0)));
  return out;
}

}  // namespace

ShearParams::ShearParams() : ShearParams(1.0, 1.0, 1.0) {}

ShearParams::ShearParams(double alpha_, double b_, double sigma_)
    : alpha(alpha_), b(b_), sigma(sigma_) {
  f = {[](double th) { return std::sin(kTwoPi * th) / kTwoPi; },
       [](double th) { return std::cos(kTwoPi * th) / kTwoPi; }};
  f_prime = {[](double th) { return std::cos(kTwoPi * th); },
             [](double th) { return -std::sin(kTwoPi * th); }};
}

double ShearParams::sum_condition_residual(int n_grid) const {
  double worst = 0.0;
  for (int k = 0; k < n_grid; ++k) {
    const double th = static_cast<double>(k) / n_grid;
    double s = 0.0;
    for (const auto& fp : f_prime) {
      const double d = fp(th);
      s += d * d;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

LyapPair lyapunov_quadrature(double alpha, double b, double sigma) {
  if (!(alpha >= 0.0) || !(b >= 0.0) || !(sigma >= 0.0))
    throw InputError("BadShearParams",
                     "lyapunov_quadrature: alpha, b, sigma must be >= 0");
  LyapPair out;
  out.method = LyapMethod::Quadrature;
  const double bs = b * sigma;
  if (bs == 0.0) {
    // no shear/noise interplay: neutral phase direction and -alpha contraction
    out.lambda1 = 0.0;
    out.lambda2 = -alpha;
    return out;
  }
  out.lambda1 = -alpha / 2.0 + (bs / 2.0) * mean_v(alpha, bs);
  out.lambda2 = -alpha - out.lambda1;
  return out;
}

double compute_c0() {
  static const double cached = [] {
    auto lambda1 = [](double sigma) {
      return lyapunov_quadrature(1.0, 1.0, sigma).lambda1;
    };
    double lo = 1.0, hi = 3.0;
    for (int k = 0; lambda1(lo) >= 0.0; ++k) {
      lo /= 2.0;
      if (k > 20) throw NumericalError("BracketingFailure", "compute_c0: no negative side");
    }
    for (int k = 0; lambda1(hi) <= 0.0; ++k) {
      hi *= 2.0;
      if (k > 20) throw NumericalError("BracketingFailure", "compute_c0: no positive side");
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (lambda1(mid) < 0.0 ? lo : hi) = mid;
    }
    const double sigma0 = 0.5 * (lo + hi);
    return 1.0 / (sigma0 * sigma0);
  }();
  return cached;
}

double sigma_zero(double alpha, double b) {
  if (!(alpha > 0.0) || !(b > 0.0))
    throw InputError("BadShearParams", "sigma_zero: alpha, b must be > 0");
  return std::pow(alpha, 1.5) / (std::sqrt(compute_c0()) * b);
}

LyapPair mc_lyapunov_cylinder(const ShearParams& params, double t_total,
                              int n_reps, std::uint64_t base_seed) {
  if (n_reps < 2) throw InputError("BadReps", "mc_lyapunov_cylinder: n_reps >= 2");
  const double alpha = params.alpha, b = params.b, sigma = params.sigma;
  const auto m = static_cast<int>(params.f.size());

  // state (y, theta, v_y, v_theta); the tangent pair rides along the path
  kernel::VectorField drift = [alpha, b](double, const double* y, double* d) {
    d[0] = -alpha * y[0];
    d[1] = 1.0 + b * y[0];
    d[2] = -alpha * y[2];
    d[3] = b * y[2];
  };
  kernel::DiffusionField diffusion = [&params, sigma, m](double, const double* y,
                                                         double* g) {
    for (int j = 0; j < m; ++j) {
      g[j * 4 + 0] = sigma * params.f[static_cast<std::size_t>(j)](y[1]);
      g[j * 4 + 1] = 0.0;
      g[j * 4 + 2] = sigma * params.f_prime[static_cast<std::size_t>(j)](y[1]) * y[3];
      g[j * 4 + 3] = 0.0;
    }
  };

  std::vector<RepStats> reps(static_cast<std::size_t>(n_reps));
  kernel::parallel_for(static_cast<std::size_t>(n_reps), kernel::resolve_threads(),
                       [&](std::size_t r) {
                         double y[4] = {0.0, 0.0, std::sqrt(0.5), std::sqrt(0.5)};
                         reps[r] = one_rep(drift, diffusion, m, y, 20.0, t_total,
                                           1e-3, kernel::derive_seed(base_seed, r),
                                           nullptr);
                       });
  return mc_reduce(reps, true, alpha);
}

LyapPair mc_lyapunov_hopf(double alpha, double beta, double a, double b,
                          double sigma, double t_total, int n_reps,
                          std::uint64_t base_seed) {
  if (!(a > 0.0)) throw InputError("BadShearParams", "mc_lyapunov_hopf: a > 0");
  if (n_reps < 2) throw InputError("BadReps", "mc_lyapunov_hopf: n_reps >= 2");

  kernel::VectorField drift = [=](double, const double* y, double* d) {
    const double x = y[0], yy = y[1], vx = y[2], vy = y[3];
    const double rr = x * x + yy * yy;
    const double u = a * x - b * yy;   // radial coupling
    const double w = b * x + a * yy;   // rotational coupling
    d[0] = alpha * x - beta * yy - u * rr;
    d[1] = alpha * yy + beta * x - w * rr;
    const double j11 = alpha - a * rr - 2.0 * x * u;
    const double j12 = -beta + b * rr - 2.0 * yy * u;
    const double j21 = beta - b * rr - 2.0 * x * w;
    const double j22 = alpha - a * rr - 2.0 * yy * w;
    d[2] = j11 * vx + j12 * vy;
    d[3] = j21 * vx + j22 * vy;
  };
  kernel::DiffusionField diffusion = [sigma](double, const double*, double* g) {
    for (int k = 0; k < 8; ++k) g[k] = 0.0;
    g[0 * 4 + 0] = sigma;
    g[1 * 4 + 1] = sigma;
  };
  std::function<double(const double*)> div_fn = [alpha, a](const double* y) {
    return 2.0 * alpha - 4.0 * a * (y[0] * y[0] + y[1] * y[1]);
  };

  const double r0 = alpha > 0.0 ? std::sqrt(alpha / a) : 0.5;
  std::vector<RepStats> reps(static_cast<std::size_t>(n_reps));
  kernel::parallel_for(static_cast<std::size_t>(n_reps), kernel::resolve_threads(),
                       [&](std::size_t r) {
                         double y[4] = {r0, 0.0, std::sqrt(0.5), std::sqrt(0.5)};
                         reps[r] = one_rep(drift, diffusion, 2, y, 20.0, t_total,
                                           1e-3, kernel::derive_seed(base_seed, r),
                                           div_fn);
                       });
  return mc_reduce(reps, false, alpha);
}

}  // namespace dlimit::shear
