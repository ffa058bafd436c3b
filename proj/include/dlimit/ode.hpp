#pragma once

// ============================================================================
// Adaptive deterministic integration: Dormand-Prince 5(4) embedded pair with
// PI step-size control, continuous (dense) output, and event location by
// bisection on the dense interpolant. StepUnderflow and NonFiniteState are
// first-class outcomes consumed by callers, never crashes.
// ============================================================================

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace dlimit::kernel {

/// f(t, y, dydt) writes the derivative of the `dim`-vector y into dydt.
using VectorField = std::function<void(double, const double*, double*)>;

struct OdeOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;   ///< 0: choose automatically
  double max_step = 0.0;       ///< 0: no cap beyond the span
  double max_sample_dt = 0.0;  ///< >0: resample dense output at this spacing
};

enum class OdeStatus {
  Ok,             ///< reached the end of the span
  StepUnderflow,  ///< step fell below 1e-14 * span (unresolved stiffness)
  NonFiniteState, ///< overflow/NaN (finite-time blow-up)
  EventHit,       ///< stopped at an event section crossing
};

const char* to_string(OdeStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<double> states;  ///< row-major, dim entries per sample
  int dim = 0;
  std::string integrator;
  double rel_tol = 0.0;
  double abs_tol = 0.0;

  std::size_t size() const { return times.size(); }
  const double* state(std::size_t i) const { return states.data() + i * static_cast<std::size_t>(dim); }
  double coord(std::size_t i, int c) const { return states[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)]; }
  void push(double t, const double* y) {
    times.push_back(t);
    states.insert(states.end(), y, y + dim);
  }
};

struct OdeResult {
  Trajectory traj;
  OdeStatus status = OdeStatus::Ok;
};

/// Codimension-one section {y[coord] = level} restricted to a window in the
/// remaining coordinates. direction: +1 counts upward crossings only, -1
/// downward, 0 both.
struct EventSection {
  int coord = 0;
  double level = 0.0;
  struct Window {
    int coord;
    double lo, hi;
  };
  std::vector<Window> windows;
  int direction = 0;
};

struct EventHit {
  int section = -1;  ///< index into the sections vector; -1 if none hit
  double t = 0.0;
  std::vector<double> state;
};

OdeResult integrate_ode(const VectorField& f, int dim,
                        std::array<double, 2> t_span, const double* y0,
                        const OdeOptions& opts = {});

/// Like integrate_ode but stops at the first transversal crossing of any
/// section whose window test passes; crossing time located by bisection on
/// the dense interpolant to 1e-10 * span.
OdeResult integrate_ode_events(const VectorField& f, int dim,
                               std::array<double, 2> t_span, const double* y0,
                               const std::vector<EventSection>& sections,
                               EventHit& hit, const OdeOptions& opts = {});

}  // namespace dlimit::kernel
