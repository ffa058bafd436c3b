/// Tests for the fastslow module: the transcritical two-parameter classifier,
/// the four-component oscillator classifier, maxima counting, and the Benettin
/// top-exponent estimator.
///
/// Reference values are produced by independent routes where possible: the
/// Lorenz exponent is cross-checked against a QR-based estimator implemented
/// here with a fixed-step integrator, and the oscillator right-hand side is
/// duplicated by hand. Dynamical outcomes (labels, wedge widths, attraction
/// distances) are pinned from long, tolerance-tightened integrations.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "dlimit/types.hpp"
#include "dlimit/fastslow.hpp"
#include "dlimit/ode.hpp"
#include "doctest.h"

using dlimit::InputError;
using dlimit::NumericalError;
using namespace dlimit::fastslow;

namespace {

/// Order used for monotonicity checks: the label pattern along increasing
/// delta at fixed eps is CriticalTransition, then Canard, then
/// ExchangeOfStability.
int label_rank(TcLabel label) {
  switch (label) {
    case TcLabel::CriticalTransition: return 0;
    case TcLabel::Canard: return 1;
    case TcLabel::ExchangeOfStability: return 2;
  }
  return -1;
}

bool is_canard(double eps, double delta) {
  try {
    return classify_transcritical(eps, delta) == TcLabel::Canard;
  } catch (const NumericalError&) {
    // A trajectory that leaves the box without meeting any section is not a
    // canard; near the wedge edges this is a legitimate outcome.
    return false;
  }
}

/// Bisect one edge of the canard wedge in delta at fixed eps.
double wedge_edge(double eps, bool upper) {
  double in = eps;
  double out = upper ? 1.3 * eps : 0.7 * eps;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (in + out);
    if (mid == in || mid == out) break;
    (is_canard(eps, mid) ? in : out) = mid;
  }
  return 0.5 * (in + out);
}

}  // namespace

TEST_SUITE("fastslow") {

TEST_CASE("transcritical classifier reproduces the three reference regimes") {
  const double eps = 0.1;
  const double root = std::sqrt(eps);
  CHECK(classify_transcritical(eps, eps * (1.0 + root)) ==
        TcLabel::ExchangeOfStability);
  CHECK(classify_transcritical(eps, eps * (1.0 - root)) ==
        TcLabel::CriticalTransition);
  CHECK(classify_transcritical(eps, eps) == TcLabel::Canard);

  // The delta = eps diagonal is a canard for every admissible eps.
  CHECK(classify_transcritical(0.05, 0.05) == TcLabel::Canard);
  CHECK(classify_transcritical(0.2, 0.2) == TcLabel::Canard);
}

TEST_CASE("transcritical classifier validates its inputs") {
  CHECK_THROWS_AS((void)classify_transcritical(0.0, 0.1), InputError);
  CHECK_THROWS_AS((void)classify_transcritical(-0.1, 0.1), InputError);
  CHECK_THROWS_AS((void)classify_transcritical(0.31, 0.1), InputError);
  CHECK_THROWS_AS((void)classify_transcritical(0.1, 0.0), InputError);
  CHECK_THROWS_AS((void)classify_transcritical(0.1, -1.0), InputError);
}

TEST_CASE("transcritical ambiguity is reported, not guessed") {
  // A box whose top face sits below the canard checkpoint cuts every orbit
  // short; the classifier must refuse rather than pick a label.
  Box low_top;
  low_top.y_max = 0.5;
  CHECK_THROWS_AS((void)classify_transcritical(0.1, 0.1316, low_top),
                  NumericalError);
}

TEST_CASE("transcritical label is monotone in delta with a single flip") {
  const double eps = 0.1;
  const std::vector<double> rel = {0.90, 0.95, 0.99, 1.00, 1.01, 1.05, 1.10};
  std::vector<int> ranks;
  for (double r : rel)
    ranks.push_back(label_rank(classify_transcritical(eps, r * eps)));

  CHECK(ranks.front() == 0);
  CHECK(ranks.back() == 2);
  CHECK(std::is_sorted(ranks.begin(), ranks.end()));

  // Bisection brackets one connected flip interval around delta = eps.
  const double lo = wedge_edge(eps, false);
  const double hi = wedge_edge(eps, true);
  CHECK(lo < hi);
  CHECK(lo > 0.99 * eps);
  CHECK(hi < 1.01 * eps);
  CHECK(classify_transcritical(eps, 0.5 * (lo + hi)) == TcLabel::Canard);
}

TEST_CASE("canard wedge width shrinks rapidly with eps") {
  const double w020 = wedge_edge(0.20, true) - wedge_edge(0.20, false);
  const double w010 = wedge_edge(0.10, true) - wedge_edge(0.10, false);
  const double w005 = wedge_edge(0.05, true) - wedge_edge(0.05, false);

  CHECK(w020 > w010);
  CHECK(w010 > w005);
  CHECK(w005 > 0.0);

  // Pinned magnitudes (bisection with 64 iterations, tolerances 1e-10/1e-12):
  // 2.317e-3, 4.986e-6, 7.92e-11. The brackets leave room for platform noise
  // while proving the separation spans seven orders of magnitude.
  CHECK(w020 == doctest::Approx(2.317e-3).epsilon(0.05));
  CHECK(w010 == doctest::Approx(4.986e-6).epsilon(0.05));
  CHECK(w005 > 1e-12);
  CHECK(w005 < 1e-9);
}

TEST_CASE("orbits reach the attracting branch to O(eps) before y = -1") {
  // Fenichel attraction: by the time y = -1 the orbit sits within O(eps) of
  // the attracting critical branch x = y (y < 0). Generic delta choices keep
  // the orbit off the exact invariant line that exists at delta = eps.
  for (double dfac : {2.0, 0.5}) {
    std::vector<double> scaled;
    for (double eps : {0.05, 0.1, 0.2}) {
      const double delta = dfac * eps;
      const double forcing = eps * eps / delta;
      dlimit::kernel::VectorField f = [eps, forcing](double, const double* y,
                                                     double* out) {
        out[0] = (y[0] - y[1]) * (y[0] + y[1]) + forcing;
        out[1] = eps;
      };
      dlimit::kernel::EventSection sec{1, -1.0, {}, +1};
      dlimit::kernel::EventHit hit;
      double y0[2] = {-3.0, -3.0};
      dlimit::kernel::OdeOptions opts;
      opts.rel_tol = 1e-10;
      opts.abs_tol = 1e-12;
      auto res = dlimit::kernel::integrate_ode_events(f, 2, {0.0, 10.0 / eps},
                                                      y0, {sec}, hit, opts);
      REQUIRE(res.status == dlimit::kernel::OdeStatus::EventHit);
      const double dist = std::abs(hit.state[0] - hit.state[1]);
      CHECK(dist < 5.0 * eps);
      CHECK(dist > 0.02 * eps);
      scaled.push_back(dist / eps);
    }
    // The distance really is O(eps): dist/eps is stable across a 4x range.
    CHECK(scaled[2] / scaled[0] == doctest::Approx(1.0).epsilon(0.25));
  }
}

TEST_CASE("olsen_rhs matches hand-evaluated values") {
  const OlsenParams p;

  SUBCASE("zero state isolates the constant terms") {
    const auto r = olsen_rhs({0.0, 0.0, 0.0, 0.0}, 0.13, 0.031);
    CHECK(r[0] == doctest::Approx(0.031 * 0.031 * p.p1).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(0.13 * 0.031 * 0.13).epsilon(1e-15));
    CHECK(r[2] == doctest::Approx(0.13 * p.p4).epsilon(1e-15));
    CHECK(r[3] == 0.0);
  }

  SUBCASE("y = 0 reduces the first component to pure relaxation") {
    const auto r = olsen_rhs({0.3, 1.7, 0.2, 0.0}, 0.1, 0.05);
    CHECK(r[0] == doctest::Approx(0.05 * 0.05 * (p.p1 - 0.3)).epsilon(1e-15));
  }

  SUBCASE("generic state agrees with an independent duplicate") {
    const double a = 0.7, b = 1.3, x = 0.21, y = 0.045;
    const double eps = 0.13, delta = 0.031;
    const auto r = olsen_rhs({a, b, x, y}, eps, delta);

    const double da = delta * delta * (0.97 - a) - a * b * y;
    const double db = eps * (delta * eps - delta * b * x) - delta * a * b * y;
    const double dx =
        (-x * x + eps * (b - 0.98) * x + 3.0 * a * b * y + eps * eps * 1.2e-5) /
        eps;
    const double dy = 3.93 * (x * x - y - a * b * y);
    CHECK(r[0] == doctest::Approx(da).epsilon(1e-14));
    CHECK(r[1] == doctest::Approx(db).epsilon(1e-14));
    CHECK(r[2] == doctest::Approx(dx).epsilon(1e-14));
    CHECK(r[3] == doctest::Approx(dy).epsilon(1e-14));
  }

  SUBCASE("the alpha field scales the linear a term") {
    OlsenParams q;
    q.alpha = 2.0;
    const auto r = olsen_rhs({0.5, 0.0, 0.0, 0.0}, 0.1, 0.2, q);
    CHECK(r[0] == doctest::Approx(0.2 * 0.2 * (q.p1 - 2.0 * 0.5)).epsilon(1e-15));
  }
}

TEST_CASE("count_maxima counts strict prominent interior maxima") {
  dlimit::kernel::OdeOptions opts;
  opts.rel_tol = 1e-10;
  opts.abs_tol = 1e-12;
  opts.max_sample_dt = 0.01;

  SUBCASE("sine over two periods has two maxima") {
    dlimit::kernel::VectorField f = [](double t, const double*, double* out) {
      out[0] = std::cos(t);
    };
    double y0[1] = {0.0};
    auto res = dlimit::kernel::integrate_ode(f, 1, {0.0, 4.0 * M_PI}, y0, opts);
    REQUIRE(res.status == dlimit::kernel::OdeStatus::Ok);
    CHECK(count_maxima(res.traj, 0, {0.0, 4.0 * M_PI}, 0.1) == 2);
  }

  SUBCASE("constant signal has none") {
    dlimit::kernel::VectorField f = [](double, const double*, double* out) {
      out[0] = 0.0;
    };
    double y0[1] = {1.0};
    auto res = dlimit::kernel::integrate_ode(f, 1, {0.0, 10.0}, y0, opts);
    REQUIRE(res.status == dlimit::kernel::OdeStatus::Ok);
    CHECK(count_maxima(res.traj, 0, {0.0, 10.0}) == 0);
  }

  SUBCASE("the prominence floor suppresses ripple") {
    // sin(t) carrying a 0.1-amplitude, frequency-40 ripple: every ripple
    // period contributes a shallow maximum unless the floor filters it.
    dlimit::kernel::VectorField f = [](double t, const double*, double* out) {
      out[0] = std::cos(t) + 4.0 * std::cos(40.0 * t);
    };
    double y0[1] = {0.0};
    auto res = dlimit::kernel::integrate_ode(f, 1, {0.0, 4.0 * M_PI}, y0, opts);
    REQUIRE(res.status == dlimit::kernel::OdeStatus::Ok);
    CHECK(count_maxima(res.traj, 0, {0.0, 4.0 * M_PI}, 0.5) == 2);
    CHECK(count_maxima(res.traj, 0, {0.0, 4.0 * M_PI}, 0.0) > 10);
  }

  SUBCASE("oscillator orbit keeps its count across consecutive windows") {
    // At eps = 0.05, delta = 0.1 the four-component oscillator settles onto a
    // sustained relaxation orbit; the per-window maxima count of the fast
    // component is a stable observable.
    auto f = olsen_field(0.05, 0.1);
    dlimit::kernel::OdeOptions o;
    o.rel_tol = 1e-9;
    o.abs_tol = 1e-12;
    o.max_sample_dt = 0.01;
    double y[4] = {1.0, 1.0, 1.0, 1.0};
    auto res = dlimit::kernel::integrate_ode(f, 4, {0.0, 2800.0}, y, o);
    REQUIRE(res.status == dlimit::kernel::OdeStatus::Ok);
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < res.traj.size(); ++i) {
      if (res.traj.times[i] < 2000.0) continue;
      lo = std::min(lo, res.traj.coord(i, 2));
      hi = std::max(hi, res.traj.coord(i, 2));
    }
    const double floor = 1e-3 * (hi - lo);
    const int c1 = count_maxima(res.traj, 2, {2000.0, 2400.0}, floor);
    const int c2 = count_maxima(res.traj, 2, {2400.0, 2800.0}, floor);
    CHECK(c1 >= 1);
    CHECK(c1 == c2);
  }
}

TEST_CASE("top_lyapunov_benettin reproduces reference exponents") {
  SUBCASE("scalar linear flow") {
    dlimit::kernel::VectorField f = [](double, const double* y, double* out) {
      out[0] = -0.7 * y[0];
    };
    MatrixField j = [](double, const double*, double* out) { out[0] = -0.7; };
    const auto est = top_lyapunov_benettin(f, j, {1.0}, 50.0, 0.5);
    CHECK(est.lambda1 == doctest::Approx(-0.7).epsilon(1e-6));
  }

  SUBCASE("planar limit cycle has a zero top exponent") {
    const double mu = 1.0;
    dlimit::kernel::VectorField f = [mu](double, const double* y, double* out) {
      out[0] = y[1];
      out[1] = mu * (1.0 - y[0] * y[0]) * y[1] - y[0];
    };
    MatrixField j = [mu](double, const double* y, double* out) {
      out[0] = 0.0;
      out[1] = 1.0;
      out[2] = -2.0 * mu * y[0] * y[1] - 1.0;
      out[3] = mu * (1.0 - y[0] * y[0]);
    };
    const auto est = top_lyapunov_benettin(f, j, {2.0, 0.0}, 500.0, 1.0);
    CHECK(std::abs(est.lambda1) < 1e-3);
  }

  SUBCASE("Lorenz top exponent, cross-checked against a QR estimator") {
    const double s = 10.0, r = 28.0, b = 8.0 / 3.0;
    dlimit::kernel::VectorField f = [=](double, const double* y, double* out) {
      out[0] = s * (y[1] - y[0]);
      out[1] = y[0] * (r - y[2]) - y[1];
      out[2] = y[0] * y[1] - b * y[2];
    };
    MatrixField j = [=](double, const double* y, double* out) {
      out[0] = -s;
      out[1] = s;
      out[2] = 0.0;
      out[3] = r - y[2];
      out[4] = -1.0;
      out[5] = -y[0];
      out[6] = y[1];
      out[7] = y[0];
      out[8] = -b;
    };
    const auto est = top_lyapunov_benettin(f, j, {1.0, 1.0, 20.0}, 500.0, 0.5);
    CHECK(est.lambda1 == doctest::Approx(0.9).epsilon(0.06));

    // Independent oracle: fixed-step RK4 on the state plus one tangent,
    // renormalised every step (one-vector QR reduces to normalisation).
    auto rhs = [&](const std::array<double, 6>& y, std::array<double, 6>& d) {
      d[0] = s * (y[1] - y[0]);
      d[1] = y[0] * (r - y[2]) - y[1];
      d[2] = y[0] * y[1] - b * y[2];
      d[3] = -s * y[3] + s * y[4];
      d[4] = (r - y[2]) * y[3] - y[4] - y[0] * y[5];
      d[5] = y[1] * y[3] + y[0] * y[4] - b * y[5];
    };
    std::array<double, 6> y = {1.0, 1.0, 20.0, 1.0, 0.0, 0.0};
    const double dt = 0.002;
    double acc = 0.0;
    const int n_burn = 25000, n_main = 250000;
    for (int k = 0; k < n_burn + n_main; ++k) {
      std::array<double, 6> k1, k2, k3, k4, tmp;
      rhs(y, k1);
      for (int i = 0; i < 6; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
      rhs(tmp, k2);
      for (int i = 0; i < 6; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
      rhs(tmp, k3);
      for (int i = 0; i < 6; ++i) tmp[i] = y[i] + dt * k3[i];
      rhs(tmp, k4);
      for (int i = 0; i < 6; ++i)
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      double norm =
          std::sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5]);
      if (k >= n_burn) acc += std::log(norm);
      for (int i = 3; i < 6; ++i) y[i] /= norm;
    }
    const double lam_qr = acc / (n_main * dt);
    CHECK(lam_qr == doctest::Approx(0.9).epsilon(0.06));
    CHECK(std::abs(lam_qr - est.lambda1) < 0.03);
  }

  SUBCASE("a wrong jacobian is rejected") {
    dlimit::kernel::VectorField f = [](double, const double* y, double* out) {
      out[0] = -0.7 * y[0];
    };
    MatrixField bad = [](double, const double*, double* out) { out[0] = 0.7; };
    CHECK_THROWS_AS((void)top_lyapunov_benettin(f, bad, {1.0}, 50.0, 0.5),
                    NumericalError);
  }

  SUBCASE("time arguments are validated") {
    dlimit::kernel::VectorField f = [](double, const double* y, double* out) {
      out[0] = -y[0];
    };
    MatrixField j = [](double, const double*, double* out) { out[0] = -1.0; };
    CHECK_THROWS_AS((void)top_lyapunov_benettin(f, j, {1.0}, -1.0, 0.5),
                    InputError);
    CHECK_THROWS_AS((void)top_lyapunov_benettin(f, j, {1.0}, 1.0, 2.0),
                    InputError);
  }
}

TEST_CASE("oscillation classifier on measured regimes") {
  const std::array<double, 4> seed = {1.0, 1.0, 1.0, 1.0};

  SUBCASE("input validation") {
    CHECK_THROWS_AS((void)classify_olsen(0.0, 0.1, 100.0, 100.0, seed),
                    InputError);
    CHECK_THROWS_AS((void)classify_olsen(0.05, -0.1, 100.0, 100.0, seed),
                    InputError);
  }

  SUBCASE("delta = 10 eps^2 labels Relaxation with a resolved negative exponent") {
    const auto r = classify_olsen(0.05, 0.025, 400.0, 400.0, seed);
    CHECK(r.label == OscLabel::Relaxation);
    CHECK(r.maxima_count == r.k0);
    CHECK(r.lyap_sign == -1);
    CHECK(r.conjectural);
    // Pinned: lambda1 = -5.83e-3 +- 3.5e-5 (regression error); the envelope
    // allows for step-control jitter across platforms.
    CHECK(r.lambda1 == doctest::Approx(-5.83e-3).epsilon(0.10));
    CHECK(r.lambda1 + 2.0 * r.lambda1_se < 0.0);
  }

  SUBCASE("deep small-delta regime also decays at this eps") {
    // At eps = 0.05 the equilibrium is a stable node throughout
    // delta <= 10 eps^2 (all four eigenvalues real and negative), so the
    // composite rule grades this point Relaxation as well: the maxima count
    // equals the calibrated baseline and the exponent is resolved negative.
    const auto r = classify_olsen(0.05, 2.5e-5, 400.0, 400.0, seed);
    CHECK(r.label == OscLabel::Relaxation);
    CHECK(r.maxima_count == r.k0);
    CHECK(r.lyap_sign == -1);
    CHECK(r.lambda1 == doctest::Approx(-7.06e-5).epsilon(0.15));
  }

  SUBCASE("a count below the calibrated baseline is indeterminate") {
    // At eps = 0.1 the calibration regime delta = 10 eps^2 sustains a real
    // oscillation (k0 >= 1), while delta = 1e-4 decays; the classifier must
    // refuse rather than interpolate.
    CHECK_THROWS_AS((void)classify_olsen(0.1, 1e-4, 400.0, 200.0, seed),
                    NumericalError);
  }
}

}  // TEST_SUITE
