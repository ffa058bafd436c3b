#include "dlimit/ode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dlimit::kernel {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output quartic coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

bool all_finite(const double* v, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(v[i])) return false;
  return true;
}

struct Stepper {
  const VectorField& f;
  int dim;
  double rel_tol, abs_tol;

  std::vector<double> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  std::vector<double> r1, r2, r3, r4, r5;  // dense coefficients of last step

  Stepper(const VectorField& f_, int dim_, double rt, double at)
      : f(f_), dim(dim_), rel_tol(rt), abs_tol(at) {
    for (auto* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &ytmp, &ynew, &r1, &r2,
                    &r3, &r4, &r5})
      v->assign(static_cast<std::size_t>(dim), 0.0);
  }

  // One trial step y(t) -> ynew(t+h); k1 must hold f(t, y). Returns the
  // scaled RMS error estimate (NaN propagates if states go non-finite).
  double try_step(double t, const double* y, double h) {
    auto stage = [&](std::vector<double>& out, double c,
                     std::initializer_list<std::pair<const std::vector<double>*, double>> terms) {
      for (int i = 0; i < dim; ++i) {
        double acc = y[i];
        for (const auto& [kv, a] : terms) acc += h * a * (*kv)[static_cast<std::size_t>(i)];
        ytmp[static_cast<std::size_t>(i)] = acc;
      }
      f(t + c * h, ytmp.data(), out.data());
    };
    stage(k2, c2, {{&k1, a21}});
    stage(k3, c3, {{&k1, a31}, {&k2, a32}});
    stage(k4, c4, {{&k1, a41}, {&k2, a42}, {&k3, a43}});
    stage(k5, c5, {{&k1, a51}, {&k2, a52}, {&k3, a53}, {&k4, a54}});
    stage(k6, 1.0, {{&k1, a61}, {&k2, a62}, {&k3, a63}, {&k4, a64}, {&k5, a65}});
    for (int i = 0; i < dim; ++i) {
      const auto u = static_cast<std::size_t>(i);
      ynew[u] = y[i] + h * (b1 * k1[u] + b3 * k3[u] + b4 * k4[u] + b5 * k5[u] +
                            b6 * k6[u]);
    }
    f(t + h, ynew.data(), k7.data());

    double sum = 0.0;
    for (int i = 0; i < dim; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double e = h * (e1 * k1[u] + e3 * k3[u] + e4 * k4[u] + e5 * k5[u] +
                            e6 * k6[u] + e7 * k7[u]);
      const double sc =
          abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(ynew[u]));
      const double q = e / sc;
      sum += q * q;
    }
    return std::sqrt(sum / dim);
  }

  // Dense coefficients for the accepted step [t, t+h].
  void make_dense(const double* y, double h) {
    for (int i = 0; i < dim; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double ydiff = ynew[u] - y[i];
      const double bspl = h * k1[u] - ydiff;
      r1[u] = y[i];
      r2[u] = ydiff;
      r3[u] = bspl;
      r4[u] = ydiff - h * k7[u] - bspl;
      r5[u] = h * (d1 * k1[u] + d3 * k3[u] + d4 * k4[u] + d5 * k5[u] +
                   d6 * k6[u] + d7 * k7[u]);
    }
  }

  double dense_coord(double theta, int c) const {
    const auto u = static_cast<std::size_t>(c);
    const double t1m = 1.0 - theta;
    return r1[u] +
           theta * (r2[u] + t1m * (r3[u] + theta * (r4[u] + t1m * r5[u])));
  }

  void dense_state(double theta, double* out) const {
    for (int i = 0; i < dim; ++i) out[i] = dense_coord(theta, i);
  }

  double initial_step(double t0, const double* y0, double span,
                      double max_step) {
    double d0 = 0.0, d1n = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double sc = abs_tol + rel_tol * std::abs(y0[i]);
      const double q0 = y0[i] / sc, q1 = k1[static_cast<std::size_t>(i)] / sc;
      d0 += q0 * q0;
      d1n += q1 * q1;
    }
    d0 = std::sqrt(d0 / dim);
    d1n = std::sqrt(d1n / dim);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 * span : 0.01 * (d0 / d1n);
    h0 = std::min(h0, span);
    for (int i = 0; i < dim; ++i)
      ytmp[static_cast<std::size_t>(i)] = y0[i] + h0 * k1[static_cast<std::size_t>(i)];
    f(t0 + h0, ytmp.data(), k2.data());
    double d2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double sc = abs_tol + rel_tol * std::abs(y0[i]);
      const double q = (k2[u] - k1[u]) / sc;
      d2 += q * q;
    }
    d2 = std::sqrt(d2 / dim) / h0;
    const double m = std::max(d1n, d2);
    double h1 = (m <= 1e-15) ? std::max(1e-6 * span, h0 * 1e-3)
                             : std::pow(0.01 / m, 0.2);
    double h = std::min({100.0 * h0, h1, span});
    if (max_step > 0) h = std::min(h, max_step);
    return h;
  }
};

}  // namespace

const char* to_string(OdeStatus s) {
  switch (s) {
    case OdeStatus::Ok: return "Ok";
    case OdeStatus::StepUnderflow: return "StepUnderflow";
    case OdeStatus::NonFiniteState: return "NonFiniteState";
    case OdeStatus::EventHit: return "EventHit";
  }
  return "?";
}

namespace {

OdeResult integrate_core(const VectorField& f, int dim,
                         std::array<double, 2> t_span, const double* y0,
                         const OdeOptions& opts,
                         const std::vector<EventSection>* sections,
                         EventHit* hit) {
  const double t0 = t_span[0], t1 = t_span[1];
  if (!(t1 > t0)) throw std::invalid_argument("integrate_ode: need t0 < t1");
  if (!(opts.rel_tol > 0) || !(opts.abs_tol > 0))
    throw std::invalid_argument("integrate_ode: tolerances must be positive");
  const double span = t1 - t0;
  const double hmin = 1e-14 * span;

  OdeResult res;
  res.traj.dim = dim;
  res.traj.integrator = "dopri5";
  res.traj.rel_tol = opts.rel_tol;
  res.traj.abs_tol = opts.abs_tol;
  res.traj.push(t0, y0);

  Stepper st(f, dim, opts.rel_tol, opts.abs_tol);
  std::vector<double> y(y0, y0 + dim), yev(static_cast<std::size_t>(dim));
  double t = t0;

  if (!all_finite(y.data(), dim)) {
    res.status = OdeStatus::NonFiniteState;
    return res;
  }
  f(t, y.data(), st.k1.data());
  if (!all_finite(st.k1.data(), dim)) {
    res.status = OdeStatus::NonFiniteState;
    return res;
  }

  double h = opts.initial_step > 0
                 ? std::min(opts.initial_step, span)
                 : st.initial_step(t0, y.data(), span, opts.max_step);
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  double facold = 1e-4;
  bool last_reject_nonfinite = false;

  auto record_dense_samples = [&](double tq, double hq, double theta_stop) {
    if (opts.max_sample_dt <= 0) return;
    const double up_to = theta_stop * hq;
    for (double s = opts.max_sample_dt; s < up_to - 1e-12 * span;
         s += opts.max_sample_dt) {
      st.dense_state(s / hq, yev.data());
      res.traj.push(tq + s, yev.data());
    }
  };

  while (t < t1) {
    h = std::min(h, t1 - t);
    if (opts.max_step > 0) h = std::min(h, opts.max_step);
    if (h < hmin) {
      res.status = last_reject_nonfinite ? OdeStatus::NonFiniteState
                                         : OdeStatus::StepUnderflow;
      return res;
    }

    const double err = st.try_step(t, y.data(), h);
    if (!std::isfinite(err) || !all_finite(st.ynew.data(), dim)) {
      last_reject_nonfinite = true;
      h *= 0.5;
      continue;
    }
    last_reject_nonfinite = false;

    const double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
      st.make_dense(y.data(), h);

      // Event check on this step via the dense interpolant.
      if (sections && !sections->empty()) {
        int best_sec = -1;
        double best_theta = 2.0;
        for (std::size_t si = 0; si < sections->size(); ++si) {
          const EventSection& sec = (*sections)[si];
          const double g0 = y[static_cast<std::size_t>(sec.coord)] - sec.level;
          const double g1 = st.ynew[static_cast<std::size_t>(sec.coord)] - sec.level;
          const bool up = g0 < 0.0 && g1 >= 0.0;
          const bool down = g0 > 0.0 && g1 <= 0.0;
          if (!(up || down)) continue;
          if (sec.direction > 0 && !up) continue;
          if (sec.direction < 0 && !down) continue;
          double lo = 0.0, hi = 1.0, glo = g0;
          while ((hi - lo) * h > 1e-10 * span) {
            const double mid = 0.5 * (lo + hi);
            const double gm = st.dense_coord(mid, sec.coord) - sec.level;
            if ((glo < 0.0) == (gm < 0.0)) {
              lo = mid;
              glo = gm;
            } else {
              hi = mid;
            }
          }
          const double theta = 0.5 * (lo + hi);
          st.dense_state(theta, yev.data());
          bool in_window = true;
          for (const auto& w : sec.windows) {
            const double v = yev[static_cast<std::size_t>(w.coord)];
            if (v < w.lo || v > w.hi) {
              in_window = false;
              break;
            }
          }
          if (in_window && theta < best_theta) {
            best_theta = theta;
            best_sec = static_cast<int>(si);
          }
        }
        if (best_sec >= 0) {
          record_dense_samples(t, h, best_theta);
          st.dense_state(best_theta, yev.data());
          const double tstar = t + best_theta * h;
          res.traj.push(tstar, yev.data());
          if (hit) {
            hit->section = best_sec;
            hit->t = tstar;
            hit->state = yev;
          }
          res.status = OdeStatus::EventHit;
          return res;
        }
      }

      record_dense_samples(t, h, 1.0);
      t += h;
      y = st.ynew;
      st.k1 = st.k7;  // FSAL
      res.traj.push(t, y.data());

      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(0.1, std::min(5.0, fac / safe));
      facold = std::max(err, 1e-4);
      h /= fac;
    } else {
      h /= std::min(5.0, fac11 / safe);
    }
  }
  res.status = OdeStatus::Ok;
  return res;
}

}  // namespace

OdeResult integrate_ode(const VectorField& f, int dim,
                        std::array<double, 2> t_span, const double* y0,
                        const OdeOptions& opts) {
  return integrate_core(f, dim, t_span, y0, opts, nullptr, nullptr);
}

OdeResult integrate_ode_events(const VectorField& f, int dim,
                               std::array<double, 2> t_span, const double* y0,
                               const std::vector<EventSection>& sections,
                               EventHit& hit, const OdeOptions& opts) {
  hit = EventHit{};
  return integrate_core(f, dim, t_span, y0, opts, &sections, &hit);
}

}  // namespace dlimit::kernel
