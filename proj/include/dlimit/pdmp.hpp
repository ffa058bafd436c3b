#pragma once

// ============================================================================
// Event-driven switching (piecewise-deterministic) integration: exponential
// holding times, deterministic flow between jumps via the adaptive stepper
// restarted at each jump, and a full jump log for exact replay.
// ============================================================================

#include <cstdint>
#include <vector>

#include "dlimit/ode.hpp"
#include "dlimit/rng.hpp"

namespace dlimit::kernel {

struct SwitchingPath {
  Trajectory traj;
  std::vector<int> modes;  ///< mode in effect at each trajectory sample
  struct Jump {
    double t;
    int from, to;
  };
  std::vector<Jump> jumps;
  std::uint64_t seed = 0;
  OdeStatus status = OdeStatus::Ok;
};

/// rate_matrix[i][j] is the jump rate from mode i to mode j (diagonal
/// ignored). Flows start at t = t0 and run until t_end.
SwitchingPath integrate_pdmp(const std::vector<VectorField>& mode_fields,
                             const std::vector<std::vector<double>>& rate_matrix,
                             int dim, const double* y0, int mode0, double t0,
                             double t_end, std::uint64_t seed,
                             const OdeOptions& opts = {});

}  // namespace dlimit::kernel
