#include "dlimit/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dlimit::kernel {

const char* to_string(SdeScheme s) {
  return s == SdeScheme::EulerMaruyama ? "EulerMaruyama" : "HeunStratonovich";
}

namespace {

bool all_finite(const double* v, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(v[i])) return false;
  return true;
}

}  // namespace

OdeStatus sde_run(const VectorField& drift, const DiffusionField& diffusion,
                  int dim, int noise_dim, std::array<double, 2> t_span,
                  double* y, double step, SdeScheme scheme, Rng& rng,
                  const std::function<bool(double, const double*)>& observer) {
  const double t0 = t_span[0], t1 = t_span[1];
  if (!(t1 > t0)) throw std::invalid_argument("sde_run: need t0 < t1");
  if (!(step > 0) || step > (t1 - t0) / 10.0)
    throw std::invalid_argument("sde_run: step must be in (0, span/10]");

  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t gm = d * static_cast<std::size_t>(noise_dim);
  std::vector<double> f0(d), f1(d), g0(gm), g1(gm), dw(static_cast<std::size_t>(noise_dim)),
      ypred(d);
  const double sqh = std::sqrt(step);

  const auto n_steps = static_cast<long long>(std::ceil((t1 - t0) / step - 1e-9));
  double t = t0;
  for (long long n = 0; n < n_steps; ++n) {
    const double h = std::min(step, t1 - t);
    const double sq = (h == step) ? sqh : std::sqrt(h);
    for (int j = 0; j < noise_dim; ++j) dw[static_cast<std::size_t>(j)] = sq * rng.normal();

    drift(t, y, f0.data());
    diffusion(t, y, g0.data());
    if (scheme == SdeScheme::EulerMaruyama) {
      for (int i = 0; i < dim; ++i) {
        double noise = 0.0;
        for (int j = 0; j < noise_dim; ++j)
          noise += g0[static_cast<std::size_t>(j) * d + static_cast<std::size_t>(i)] *
                   dw[static_cast<std::size_t>(j)];
        y[i] += h * f0[static_cast<std::size_t>(i)] + noise;
      }
    } else {
      for (int i = 0; i < dim; ++i) {
        double noise = 0.0;
        for (int j = 0; j < noise_dim; ++j)
          noise += g0[static_cast<std::size_t>(j) * d + static_cast<std::size_t>(i)] *
                   dw[static_cast<std::size_t>(j)];
        ypred[static_cast<std::size_t>(i)] =
            y[i] + h * f0[static_cast<std::size_t>(i)] + noise;
      }
      drift(t + h, ypred.data(), f1.data());
      diffusion(t + h, ypred.data(), g1.data());
      for (int i = 0; i < dim; ++i) {
        double noise = 0.0;
        for (int j = 0; j < noise_dim; ++j)
          noise += 0.5 *
                   (g0[static_cast<std::size_t>(j) * d + static_cast<std::size_t>(i)] +
                    g1[static_cast<std::size_t>(j) * d + static_cast<std::size_t>(i)]) *
                   dw[static_cast<std::size_t>(j)];
        y[i] += 0.5 * h *
                    (f0[static_cast<std::size_t>(i)] + f1[static_cast<std::size_t>(i)]) +
                noise;
      }
    }
    t = (n + 1 == n_steps) ? t1 : t0 + step * static_cast<double>(n + 1);
    if (!all_finite(y, dim)) return OdeStatus::NonFiniteState;
    if (observer && !observer(t, y)) return OdeStatus::Ok;
  }
  return OdeStatus::Ok;
}

SdePath integrate_sde(const VectorField& drift, const DiffusionField& diffusion,
                      int dim, int noise_dim, std::array<double, 2> t_span,
                      const double* y0, double step, SdeScheme scheme,
                      std::uint64_t seed, const SdeOptions& opts) {
  SdePath path;
  path.seed = seed;
  path.step = step;
  path.scheme = scheme;
  path.traj.dim = dim;
  path.traj.integrator = to_string(scheme);
  path.traj.push(t_span[0], y0);

  std::vector<double> y(y0, y0 + dim);
  Rng rng(seed);
  long long count = 0;
  const int stride = opts.record_stride > 0 ? opts.record_stride : 1;
  path.status = sde_run(drift, diffusion, dim, noise_dim, t_span, y.data(),
                        step, scheme, rng, [&](double t, const double* yy) {
                          if (++count % stride == 0 || t == t_span[1])
                            path.traj.push(t, yy);
                          return true;
                        });
  if (path.status == OdeStatus::NonFiniteState &&
      path.traj.times.back() != t_span[1]) {
    // keep partial path; nothing further to record
  }
  return path;
}

}  // namespace dlimit::kernel
