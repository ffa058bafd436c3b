#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "dlimit/csv.hpp"
#include "dlimit/ode.hpp"
#include "dlimit/pdmp.hpp"
#include "dlimit/rng.hpp"
#include "dlimit/sde.hpp"

using namespace dlimit::kernel;

TEST_SUITE("kernel") {

TEST_CASE("decay x'=-x reaches e^-1") {
  VectorField f = [](double, const double* y, double* dy) { dy[0] = -y[0]; };
  const double y0 = 1.0;
  auto res = integrate_ode(f, 1, {0.0, 1.0}, &y0);
  REQUIRE(res.status == OdeStatus::Ok);
  CHECK(res.traj.times.back() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(res.traj.states.back() - std::exp(-1.0)) < 1e-8);
}

TEST_CASE("planar rotation conserves radius and returns") {
  VectorField f = [](double, const double* y, double* dy) {
    dy[0] = -y[1];
    dy[1] = y[0];
  };
  const double y0[2] = {1.0, 0.0};
  const double two_pi = 2.0 * std::acos(-1.0);
  auto res = integrate_ode(f, 2, {0.0, two_pi}, y0);
  REQUIRE(res.status == OdeStatus::Ok);
  const std::size_t n = res.traj.size();
  CHECK(std::abs(res.traj.coord(n - 1, 0) - 1.0) < 1e-6);
  CHECK(std::abs(res.traj.coord(n - 1, 1) - 0.0) < 1e-6);
  for (std::size_t i = 0; i < n; ++i) {
    const double r2 = res.traj.coord(i, 0) * res.traj.coord(i, 0) +
                      res.traj.coord(i, 1) * res.traj.coord(i, 1);
    CHECK(std::abs(r2 - 1.0) < 1e-6);
  }
}

TEST_CASE("frozen fast subsystem follows the tanh closed form") {
  // x' = x^2 - 1, x(0)=1/2 has x(t) = tanh(atanh(1/2) - t): monotone decay
  // onto the attracting state -1.
  VectorField f = [](double, const double* y, double* dy) {
    dy[0] = y[0] * y[0] - 1.0;
  };
  const double x0 = 0.5;
  auto res = integrate_ode(f, 1, {0.0, 5.0}, &x0);
  REQUIRE(res.status == OdeStatus::Ok);
  const double c = std::atanh(0.5);
  for (std::size_t i = 0; i < res.traj.size(); ++i) {
    const double expect = std::tanh(c - res.traj.times[i]);
    CHECK(std::abs(res.traj.coord(i, 0) - expect) < 1e-8);
  }
  for (std::size_t i = 1; i < res.traj.size(); ++i)
    CHECK(res.traj.coord(i, 0) < res.traj.coord(i - 1, 0));
  CHECK(std::abs(res.traj.states.back() - (-1.0)) < 1e-3);
}

TEST_CASE("finite-time blow-up is a status, not a crash") {
  VectorField f = [](double, const double* y, double* dy) {
    dy[0] = y[0] * y[0];
  };
  const double x0 = 1.0;
  auto res = integrate_ode(f, 1, {0.0, 2.0}, &x0);
  CHECK((res.status == OdeStatus::StepUnderflow ||
         res.status == OdeStatus::NonFiniteState));
  CHECK(std::abs(res.traj.times.back() - 1.0) < 0.05);
  for (double v : res.traj.states) CHECK(std::isfinite(v));
}

TEST_CASE("immediate NaN in the field reports NonFiniteState") {
  VectorField f = [](double, const double*, double* dy) {
    dy[0] = std::nan("");
  };
  const double x0 = 1.0;
  auto res = integrate_ode(f, 1, {0.0, 1.0}, &x0);
  CHECK(res.status == OdeStatus::NonFiniteState);
}

TEST_CASE("event located by bisection, window respected") {
  VectorField f = [](double, const double* y, double* dy) {
    dy[0] = -y[1];
    dy[1] = y[0];
  };
  const double y0[2] = {1.0, 0.0};
  const double pi = std::acos(-1.0);

  EventSection sec;
  sec.coord = 0;
  sec.level = 0.0;
  SUBCASE("window passes at the first crossing") {
    sec.windows = {{1, 0.5, 1.5}};
    EventHit hit;
    auto res = integrate_ode_events(f, 2, {0.0, 2.0 * pi}, y0, {sec}, hit);
    REQUIRE(res.status == OdeStatus::EventHit);
    CHECK(std::abs(hit.t - pi / 2.0) < 1e-8);
    CHECK(std::abs(hit.state[1] - 1.0) < 1e-6);
  }
  SUBCASE("failed window lets the flow continue to the next crossing") {
    sec.windows = {{1, -1.5, -0.5}};
    EventHit hit;
    auto res = integrate_ode_events(f, 2, {0.0, 2.0 * pi}, y0, {sec}, hit);
    REQUIRE(res.status == OdeStatus::EventHit);
    CHECK(std::abs(hit.t - 3.0 * pi / 2.0) < 1e-8);
    CHECK(std::abs(hit.state[1] - (-1.0)) < 1e-6);
  }
  SUBCASE("directional filter skips the downward crossing") {
    sec.direction = +1;
    EventHit hit;
    auto res = integrate_ode_events(f, 2, {0.0, 2.0 * pi}, y0, {sec}, hit);
    REQUIRE(res.status == OdeStatus::EventHit);
    CHECK(std::abs(hit.t - 3.0 * pi / 2.0) < 1e-8);
  }
}

TEST_CASE("dense resampling bounds the sample spacing") {
  VectorField f = [](double, const double* y, double* dy) { dy[0] = -y[0]; };
  const double y0 = 1.0;
  OdeOptions opts;
  opts.max_sample_dt = 0.01;
  auto res = integrate_ode(f, 1, {0.0, 2.0}, &y0, opts);
  REQUIRE(res.status == OdeStatus::Ok);
  for (std::size_t i = 1; i < res.traj.size(); ++i) {
    const double dt = res.traj.times[i] - res.traj.times[i - 1];
    CHECK(dt > 0.0);
    CHECK(dt < 0.0101);
  }
  for (std::size_t i = 0; i < res.traj.size(); ++i)
    CHECK(std::abs(res.traj.coord(i, 0) - std::exp(-res.traj.times[i])) < 1e-7);
}

TEST_CASE("sde zero-noise degeneration matches the flow at scheme order") {
  VectorField drift = [](double, const double* y, double* dy) { dy[0] = -y[0]; };
  DiffusionField noiseless = [](double, const double*, double* g) { g[0] = 0.0; };
  const double y0 = 1.0;
  auto em = integrate_sde(drift, noiseless, 1, 1, {0.0, 1.0}, &y0, 1e-3,
                          SdeScheme::EulerMaruyama, 42);
  REQUIRE(em.status == OdeStatus::Ok);
  CHECK(std::abs(em.traj.states.back() - std::exp(-1.0)) < 5e-4);
  auto heun = integrate_sde(drift, noiseless, 1, 1, {0.0, 1.0}, &y0, 1e-3,
                            SdeScheme::HeunStratonovich, 42);
  CHECK(std::abs(heun.traj.states.back() - std::exp(-1.0)) < 1e-6);
}

TEST_CASE("ou stationary variance matches sigma^2/2") {
  const double sigma = 0.7;
  VectorField drift = [](double, const double* y, double* dy) { dy[0] = -y[0]; };
  DiffusionField diff = [=](double, const double*, double* g) { g[0] = sigma; };
  const double y0 = 0.0;
  SdeOptions opts;
  opts.record_stride = 1000;  // one sample per time unit at step 1e-3
  auto path = integrate_sde(drift, diff, 1, 1, {0.0, 10010.0}, &y0, 1e-3,
                            SdeScheme::EulerMaruyama, 20260814, opts);
  REQUIRE(path.status == OdeStatus::Ok);
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < path.traj.size(); ++i) {
    if (path.traj.times[i] <= 10.0) continue;
    const double v = path.traj.coord(i, 0);
    sum += v;
    sum2 += v * v;
    ++n;
  }
  REQUIRE(n >= 9900);
  const double mean = sum / static_cast<double>(n);
  const double var = sum2 / static_cast<double>(n) - mean * mean;
  const double expect = sigma * sigma / 2.0;
  // 3 standard errors for the variance of an AR-correlated series
  CHECK(std::abs(var - expect) < 0.013);
}

TEST_CASE("sde replay is bit-identical and seeds decorrelate") {
  VectorField drift = [](double, const double* y, double* dy) {
    dy[0] = -y[0] + 0.3 * std::sin(y[1]);
    dy[1] = y[0];
  };
  DiffusionField diff = [](double, const double* y, double* g) {
    g[0] = 0.5 + 0.1 * y[1] * y[1];
    g[1] = 0.2;
    g[2] = 0.0;
    g[3] = 0.4;
  };
  const double y0[2] = {1.0, 0.0};
  auto a = integrate_sde(drift, diff, 2, 2, {0.0, 2.0}, y0, 1e-3,
                         SdeScheme::HeunStratonovich, 7);
  auto b = integrate_sde(drift, diff, 2, 2, {0.0, 2.0}, y0, 1e-3,
                         SdeScheme::HeunStratonovich, 7);
  REQUIRE(a.traj.states.size() == b.traj.states.size());
  for (std::size_t i = 0; i < a.traj.states.size(); ++i)
    CHECK(a.traj.states[i] == b.traj.states[i]);
  auto c = integrate_sde(drift, diff, 2, 2, {0.0, 2.0}, y0, 1e-3,
                         SdeScheme::HeunStratonovich, 8);
  CHECK(a.traj.states.back() != c.traj.states.back());
}

TEST_CASE("sde_run streams the identical path") {
  VectorField drift = [](double, const double* y, double* dy) { dy[0] = -y[0]; };
  DiffusionField diff = [](double, const double*, double* g) { g[0] = 0.3; };
  const double y0 = 1.0;
  auto ref = integrate_sde(drift, diff, 1, 1, {0.0, 3.0}, &y0, 1e-3,
                           SdeScheme::EulerMaruyama, 99);
  double y = 1.0;
  Rng rng(99);
  auto status = sde_run(drift, diff, 1, 1, {0.0, 3.0}, &y, 1e-3,
                        SdeScheme::EulerMaruyama, rng, nullptr);
  CHECK(status == OdeStatus::Ok);
  CHECK(y == ref.traj.states.back());
}

TEST_CASE("pdmp with zero rates never jumps") {
  std::vector<VectorField> fields{
      [](double, const double* y, double* dy) { dy[0] = -y[0]; },
      [](double, const double* y, double* dy) { dy[0] = y[0]; }};
  std::vector<std::vector<double>> rates{{0.0, 0.0}, {0.0, 0.0}};
  const double y0 = 1.0;
  auto path = integrate_pdmp(fields, rates, 1, &y0, 0, 0.0, 3.0, 5);
  REQUIRE(path.status == OdeStatus::Ok);
  CHECK(path.jumps.empty());
  CHECK(std::abs(path.traj.states.back() - std::exp(-3.0)) < 1e-7);
  for (int m : path.modes) CHECK(m == 0);
}

TEST_CASE("pdmp holding times are exponential with the given rate") {
  std::vector<VectorField> fields{
      [](double, const double*, double* dy) { dy[0] = 0.0; },
      [](double, const double*, double* dy) { dy[0] = 0.0; }};
  std::vector<std::vector<double>> rates{{0.0, 2.0}, {2.0, 0.0}};
  const double y0 = 0.0;
  auto path = integrate_pdmp(fields, rates, 1, &y0, 0, 0.0, 5200.0, 31);
  REQUIRE(path.status == OdeStatus::Ok);
  REQUIRE(path.jumps.size() >= 10000);
  double prev = 0.0, sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < 10000; ++i) {
    sum += path.jumps[i].t - prev;
    prev = path.jumps[i].t;
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  CHECK(std::abs(mean - 0.5) < 0.015);  // 3 SE at n = 1e4
  for (std::size_t i = 1; i < path.jumps.size(); ++i)
    CHECK(path.jumps[i].t > path.jumps[i - 1].t);
}

TEST_CASE("derive_seed: deterministic, injective, uniform") {
  CHECK(derive_seed(123, 45) == derive_seed(123, 45));
  CHECK(derive_seed(123, 0) != derive_seed(123, 1));
  CHECK(derive_seed(1, 7) != derive_seed(2, 7));

  const int bins = 100, streams = 10000;
  std::vector<int> counts(bins, 0);
  for (int i = 0; i < streams; ++i) {
    Rng r(derive_seed(777, static_cast<std::uint64_t>(i)));
    const double u = r.uniform01();
    ++counts[static_cast<int>(u * bins)];
  }
  double chi2 = 0.0;
  const double expect = static_cast<double>(streams) / bins;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // chi-square(df=99) 0.99 quantile
  CHECK(chi2 < 134.642);
}

TEST_CASE("trajectory csv round-trips at 17 significant digits") {
  Trajectory tr;
  tr.dim = 2;
  const double y1[2] = {0.1, -1.0 / 3.0};
  const double y2[2] = {std::exp(1.0), 1e-17};
  tr.push(0.0, y1);
  tr.push(0.12345678901234567, y2);

  const auto path = std::filesystem::temp_directory_path() / "dlimit_csv_test.csv";
  write_trajectory_csv(path.string(), tr);
  auto rows = read_csv(path.string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"t", "x0", "x1"});
  CHECK(std::strtod(rows[1][1].c_str(), nullptr) == 0.1);
  CHECK(std::strtod(rows[1][2].c_str(), nullptr) == -1.0 / 3.0);
  CHECK(std::strtod(rows[2][0].c_str(), nullptr) == 0.12345678901234567);
  CHECK(std::strtod(rows[2][1].c_str(), nullptr) == std::exp(1.0));
  CHECK(std::strtod(rows[2][2].c_str(), nullptr) == 1e-17);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
