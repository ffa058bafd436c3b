#pragma once

// ============================================================================
// Fixed-step stochastic integration: Euler-Maruyama for Ito problems and the
// Heun predictor-corrector for Stratonovich problems. Paths are bit-identical
// functions of (seed, step, scheme).
// ============================================================================

#include <array>
#include <cstdint>
#include <functional>

#include "dlimit/ode.hpp"
#include "dlimit/rng.hpp"

namespace dlimit::kernel {

/// G(t, y, out) writes the dim x m diffusion matrix, column-major:
/// out[j*dim + i] multiplies dW_j in component i.
using DiffusionField = std::function<void(double, const double*, double*)>;

enum class SdeScheme { EulerMaruyama, HeunStratonovich };

const char* to_string(SdeScheme s);

struct SdePath {
  Trajectory traj;
  std::uint64_t seed = 0;
  double step = 0.0;
  SdeScheme scheme = SdeScheme::EulerMaruyama;
  OdeStatus status = OdeStatus::Ok;
};

struct SdeOptions {
  int record_stride = 1;  ///< keep every k-th step in the trajectory
};

SdePath integrate_sde(const VectorField& drift, const DiffusionField& diffusion,
                      int dim, int noise_dim, std::array<double, 2> t_span,
                      const double* y0, double step, SdeScheme scheme,
                      std::uint64_t seed, const SdeOptions& opts = {});

/// Streaming variant: observer(t, y) after every step; return false to stop
/// early. Draws the identical noise sequence as integrate_sde. Returns the
/// final status (Ok also covers observer-initiated stops).
OdeStatus sde_run(const VectorField& drift, const DiffusionField& diffusion,
                  int dim, int noise_dim, std::array<double, 2> t_span,
                  double* y /*in: y0, out: final*/, double step,
                  SdeScheme scheme, Rng& rng,
                  const std::function<bool(double, const double*)>& observer);

}  // namespace dlimit::kernel
