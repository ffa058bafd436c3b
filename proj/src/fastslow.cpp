#include "dlimit/fastslow.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace dlimit::fastslow {

const char* to_string(TcLabel label) {
  switch (label) {
    case TcLabel::ExchangeOfStability: return "ExchangeOfStability";
    case TcLabel::CriticalTransition: return "CriticalTransition";
    case TcLabel::Canard: return "Canard";
  }
  return "?";
}

const char* to_string(OscLabel label) {
  switch (label) {
    case OscLabel::Relaxation: return "Relaxation";
    case OscLabel::MMO: return "MMO";
    case OscLabel::Chaotic: return "Chaotic";
  }
  return "?";
}

TcLabel classify_transcritical(double eps, double delta, const Box& box,
                               const TcConfig& config) {
  if (!(eps > 0.0) || eps > 0.3)
    throw InputError("BadParams", "classify_transcritical: eps must be in (0, 0.3]");
  if (!(delta > 0.0))
    throw InputError("BadParams", "classify_transcritical: delta must be > 0");

  const double forcing = eps * eps / delta;
  kernel::VectorField field = [eps, forcing](double, const double* y, double* d) {
    d[0] = (y[0] - y[1]) * (y[0] + y[1]) + forcing;
    d[1] = eps;
  };
  kernel::OdeOptions opts;
  opts.rel_tol = config.rel_tol;
  opts.abs_tol = config.abs_tol;

  const double t_end = (box.y_max + 3.0 + 1.0) / eps;
  const double y0[2] = {-3.0, -3.0};

  // Leg A: until the critical-transition section, the y = 1 line, or a box
  // face, whichever comes first. Sigma- cannot fire before y = 1.
  std::vector<kernel::EventSection> legA = {
      {0, 2.0, {{1, -1.0, 1.0}}, 0},    // Sigma+
      {1, 1.0, {}, +1},                 // canard checkpoint
      {0, box.x_min, {}, -1},           // box faces
      {0, box.x_max, {}, +1},
      {1, box.y_max, {}, +1},
  };
  kernel::EventHit hit;
  auto res = kernel::integrate_ode_events(field, 2, {0.0, t_end}, y0, legA, hit, opts);
  if (res.status != kernel::OdeStatus::EventHit)
    throw NumericalError("Ambiguous",
                         "classify_transcritical: no section reached (" +
                             std::string(kernel::to_string(res.status)) + ")");
  if (hit.section == 0) return TcLabel::CriticalTransition;
  if (hit.section != 1)
    throw NumericalError("Ambiguous",
                         "classify_transcritical: left the box before y = 1");

  const double x_at_1 = hit.state[0];
  if (x_at_1 > 0.0 && std::abs(x_at_1 - 1.0) < config.tube_factor * eps)
    return TcLabel::Canard;

  // Leg B: past y = 1 the only regular outcome is the exchanged branch.
  std::vector<kernel::EventSection> legB = {
      {0, -2.0, {{1, 1.0, 3.0}}, 0},    // Sigma-
      {0, box.x_min, {}, -1},
      {0, box.x_max, {}, +1},
      {1, box.y_max, {}, +1},
  };
  const double y1[2] = {hit.state[0], hit.state[1]};
  res = kernel::integrate_ode_events(field, 2, {hit.t, t_end}, y1, legB, hit, opts);
  if (res.status == kernel::OdeStatus::EventHit && hit.section == 0)
    return TcLabel::ExchangeOfStability;
  throw NumericalError("Ambiguous",
                       "classify_transcritical: no section reached past y = 1");
}

std::array<double, 4> olsen_rhs(const std::array<double, 4>& s, double eps,
                                double delta, const OlsenParams& p) {
  const double a = s[0], b = s[1], x = s[2], y = s[3];
  return {
      delta * delta * (p.p1 - p.alpha * a) - a * b * y,
      eps * (delta * eps - delta * b * x) - delta * a * b * y,
      (-x * x + eps * (b - p.p2) * x + 3.0 * a * b * y + eps * eps * p.p4) / eps,
      p.p3 * (x * x - y - a * b * y),
  };
}

kernel::VectorField olsen_field(double eps, double delta, const OlsenParams& p) {
  return [eps, delta, p](double, const double* s, double* d) {
    const auto r = olsen_rhs({s[0], s[1], s[2], s[3]}, eps, delta, p);
    d[0] = r[0];
    d[1] = r[1];
    d[2] = r[2];
    d[3] = r[3];
  };
}

MatrixField olsen_jacobian(double eps, double delta, const OlsenParams& p) {
  return [eps, delta, p](double, const double* s, double* j) {
    const double a = s[0], b = s[1], x = s[2], y = s[3];
    // rows: d(a', b', x', y') / d(a, b, x, y)
    j[0] = -delta * delta * p.alpha - b * y;
    j[1] = -a * y;
    j[2] = 0.0;
    j[3] = -a * b;

    j[4] = -delta * b * y;
    j[5] = -eps * delta * x - delta * a * y;
    j[6] = -eps * delta * b;
    j[7] = -delta * a * b;

    j[8] = 3.0 * b * y / eps;
    j[9] = x + 3.0 * a * y / eps;
    j[10] = -2.0 * x / eps + (b - p.p2);
    j[11] = 3.0 * a * b / eps;

    j[12] = -p.p3 * b * y;
    j[13] = -p.p3 * a * y;
    j[14] = 2.0 * p.p3 * x;
    j[15] = p.p3 * (-1.0 - a * b);
  };
}

int count_maxima(const kernel::Trajectory& traj, int var_index,
                 std::pair<double, double> window, double prominence) {
  if (traj.size() < 3) return 0;
  std::vector<double> v;
  v.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (traj.times[i] >= window.first && traj.times[i] <= window.second)
      v.push_back(traj.coord(i, var_index));
  const auto n = v.size();
  if (n < 3) return 0;

  int count = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1] && v[i] > v[i + 1])) continue;
    // prominence: descend from the peak on both sides to the flanking valleys
    double left = v[i];
    for (std::size_t k = i; k-- > 0 && v[k] < v[i];) left = std::min(left, v[k]);
    double right = v[i];
    for (std::size_t k = i + 1; k < n && v[k] < v[i]; ++k) right = std::min(right, v[k]);
    if (v[i] - std::max(left, right) >= prominence) ++count;
  }
  return count;
}

LyapEstimate top_lyapunov_benettin(const kernel::VectorField& field,
                                   const MatrixField& jacobian,
                                   const std::vector<double>& state0,
                                   double t_total, double renorm_interval) {
  const auto d = state0.size();
  const auto dim = static_cast<int>(d);
  if (!(t_total > 0.0) || !(renorm_interval > 0.0) || renorm_interval >= t_total)
    throw InputError("BadParams", "top_lyapunov_benettin: bad time arguments");

  // finite-difference validation of the jacobian at state0
  {
    std::vector<double> j(d * d), fp(d), fm(d), yp(state0), ym(state0);
    jacobian(0.0, state0.data(), j.data());
    for (std::size_t c = 0; c < d; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(state0[c]));
      yp[c] += h;
      ym[c] -= h;
      field(0.0, yp.data(), fp.data());
      field(0.0, ym.data(), fm.data());
      yp[c] = state0[c];
      ym[c] = state0[c];
      for (std::size_t r = 0; r < d; ++r) {
        const double fd = (fp[r] - fm[r]) / (2.0 * h);
        const double scale = std::max(1.0, std::abs(fd));
        if (std::abs(fd - j[r * d + c]) > 1e-5 * scale)
          throw NumericalError("JacobianMismatch",
                               "top_lyapunov_benettin: jacobian entry (" +
                                   std::to_string(r) + "," + std::to_string(c) +
                                   ") disagrees with finite differences");
      }
    }
  }

  // augmented flow: state and one tangent vector
  kernel::VectorField aug = [&](double t, const double* y, double* out) {
    field(t, y, out);
    std::vector<double> j(d * d);
    jacobian(t, y, j.data());
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += j[r * d + c] * y[d + c];
      out[d + r] = acc;
    }
  };

  std::vector<double> y(2 * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) y[i] = state0[i];
  y[d] = 1.0;
  for (std::size_t i = 1; i < d; ++i) y[d + i] = 1.0 / std::sqrt(static_cast<double>(d));

  kernel::OdeOptions opts;
  opts.rel_tol = 1e-8;
  opts.abs_tol = 1e-10;

  const auto n_intervals = static_cast<int>(std::ceil(t_total / renorm_interval));
  std::vector<double> ts, logs;
  double cum = 0.0, t = 0.0;
  for (int k = 0; k < n_intervals; ++k) {
    const double t_next = std::min(t_total, (k + 1) * renorm_interval);
    auto res = kernel::integrate_ode(aug, 2 * dim, {t, t_next}, y.data(), opts);
    if (res.status != kernel::OdeStatus::Ok)
      throw NumericalError("NonFiniteState",
                           "top_lyapunov_benettin: integration failed (" +
                               std::string(kernel::to_string(res.status)) + ")");
    const double* yf = res.traj.state(res.traj.size() - 1);
    for (std::size_t i = 0; i < 2 * d; ++i) y[i] = yf[i];
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += y[d + i] * y[d + i];
    norm = std::sqrt(norm);
    cum += std::log(norm);
    for (std::size_t i = 0; i < d; ++i) y[d + i] /= norm;
    t = t_next;
    ts.push_back(t);
    logs.push_back(cum);
  }

  // slope of cumulative log-growth vs time, transient fifth discarded
  const std::size_t first = ts.size() / 5;
  const auto n = static_cast<double>(ts.size() - first);
  if (n < 3) throw InputError("BadParams", "top_lyapunov_benettin: too few intervals");
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = first; i < ts.size(); ++i) {
    mt += ts[i] / n;
    ml += logs[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = first; i < ts.size(); ++i) {
    sxx += (ts[i] - mt) * (ts[i] - mt);
    sxy += (ts[i] - mt) * (logs[i] - ml);
  }
  LyapEstimate est;
  est.lambda1 = sxy / sxx;
  double ss = 0.0;
  for (std::size_t i = first; i < ts.size(); ++i) {
    const double r = logs[i] - ml - est.lambda1 * (ts[i] - mt);
    ss += r * r;
  }
  est.se = std::sqrt(ss / (n - 2.0) / sxx);
  return est;
}

namespace {

struct OlsenRun {
  kernel::Trajectory traj;  ///< window part only, times shifted to [0, t_window]
  int maxima = 0;
};

OlsenRun olsen_window_run(double eps, double delta, double t_transient,
                          double t_window, const std::array<double, 4>& seed,
                          const OlsenParams& params) {
  auto field = olsen_field(eps, delta, params);
  kernel::OdeOptions opts;
  opts.rel_tol = 1e-9;
  opts.abs_tol = 1e-12;

  double y[4] = {seed[0], seed[1], seed[2], seed[3]};
  auto pre = kernel::integrate_ode(field, 4, {0.0, t_transient}, y, opts);
  if (pre.status != kernel::OdeStatus::Ok)
    throw NumericalError("NonFiniteState", "classify_olsen: transient diverged");
  const double* yt = pre.traj.state(pre.traj.size() - 1);

  kernel::OdeOptions wopts = opts;
  wopts.max_sample_dt = t_window / 200000.0;
  auto win = kernel::integrate_ode(field, 4, {0.0, t_window}, yt, wopts);
  if (win.status != kernel::OdeStatus::Ok)
    throw NumericalError("NonFiniteState", "classify_olsen: window diverged");

  OlsenRun out;
  out.traj = std::move(win.traj);
  double lo = out.traj.coord(0, 2), hi = lo;
  for (std::size_t i = 0; i < out.traj.size(); ++i) {
    lo = std::min(lo, out.traj.coord(i, 2));
    hi = std::max(hi, out.traj.coord(i, 2));
  }
  out.maxima = count_maxima(out.traj, 2, {0.0, t_window}, 1e-3 * (hi - lo));
  return out;
}

int calibrated_k0(double eps, double t_transient, double t_window,
                  const std::array<double, 4>& seed, const OlsenParams& params) {
  // The calibration run is deterministic, so it is memoised on everything
  // that influences it, not just eps.
  using Key = std::array<double, 12>;
  static std::map<Key, int> cache;
  static std::mutex mu;
  const Key key = {eps,     t_transient, t_window,  seed[0],  seed[1],
                   seed[2], seed[3],     params.p1, params.p2, params.p3,
                   params.p4, params.alpha};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const int k0 =
      olsen_window_run(eps, 10.0 * eps * eps, t_transient, t_window, seed, params)
          .maxima;
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, k0);
  return k0;
}

}  // namespace

OscResult classify_olsen(double eps, double delta, double t_transient,
                         double t_window, const std::array<double, 4>& seed_state,
                         const OlsenParams& params) {
  if (!(eps > 0.0) || !(delta > 0.0))
    throw InputError("BadParams", "classify_olsen: eps, delta must be > 0");

  OscResult out;
  out.k0 = calibrated_k0(eps, t_transient, t_window, seed_state, params);

  auto run = olsen_window_run(eps, delta, t_transient, t_window, seed_state, params);
  out.maxima_count = run.maxima;

  // top exponent from the end of the transient, on the slow-time field
  std::vector<double> y0(run.traj.state(0), run.traj.state(0) + 4);
  auto est = top_lyapunov_benettin(olsen_field(eps, delta, params),
                                   olsen_jacobian(eps, delta, params), y0,
                                   t_window, 0.5);
  out.lambda1 = est.lambda1;
  out.lambda1_se = est.se;

  // A stable oscillation has a true top exponent of zero, so the estimate is
  // expected to straddle zero from below; only a positive estimate that is
  // not resolved against its error bar is indeterminate.
  if (est.lambda1 - 2.0 * est.se > 0.0) {
    out.lyap_sign = +1;
    out.label = OscLabel::Chaotic;
    return out;
  }
  if (est.lambda1 > 0.0)
    throw NumericalError("Indeterminate",
                         "classify_olsen: positive exponent estimate not resolved");
  out.lyap_sign = -1;
  if (out.maxima_count == out.k0)
    out.label = OscLabel::Relaxation;
  else if (out.maxima_count > out.k0)
    out.label = OscLabel::MMO;
  else
    throw NumericalError("Indeterminate",
                         "classify_olsen: maxima count below the calibrated k0");
  return out;
}

}  // namespace dlimit::fastslow
