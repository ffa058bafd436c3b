#include "dlimit/pdmp.hpp"

#include <cmath>
#include <stdexcept>

namespace dlimit::kernel {

SwitchingPath integrate_pdmp(const std::vector<VectorField>& mode_fields,
                             const std::vector<std::vector<double>>& rate_matrix,
                             int dim, const double* y0, int mode0, double t0,
                             double t_end, std::uint64_t seed,
                             const OdeOptions& opts) {
  const int n_modes = static_cast<int>(mode_fields.size());
  if (mode0 < 0 || mode0 >= n_modes)
    throw std::invalid_argument("integrate_pdmp: mode0 out of range");
  if (rate_matrix.size() != mode_fields.size())
    throw std::invalid_argument("integrate_pdmp: rate matrix shape mismatch");
  for (const auto& row : rate_matrix) {
    if (row.size() != mode_fields.size())
      throw std::invalid_argument("integrate_pdmp: rate matrix shape mismatch");
    for (double r : row)
      if (r < 0.0) throw std::invalid_argument("integrate_pdmp: negative rate");
  }

  SwitchingPath out;
  out.seed = seed;
  out.traj.dim = dim;
  out.traj.integrator = "pdmp/dopri5";
  out.traj.rel_tol = opts.rel_tol;
  out.traj.abs_tol = opts.abs_tol;

  Rng rng(seed);
  std::vector<double> y(y0, y0 + dim);
  double t = t0;
  int mode = mode0;

  out.traj.push(t, y.data());
  out.modes.push_back(mode);

  while (t < t_end) {
    double total = 0.0;
    for (int j = 0; j < n_modes; ++j)
      if (j != mode) total += rate_matrix[static_cast<std::size_t>(mode)][static_cast<std::size_t>(j)];
    const double tau = rng.exponential(total);
    const double t_next = std::min(t_end, t + tau);

    if (t_next > t) {
      OdeResult leg = integrate_ode(mode_fields[static_cast<std::size_t>(mode)], dim,
                                    {t, t_next}, y.data(), opts);
      // append leg samples, skipping the duplicated start point
      for (std::size_t i = 1; i < leg.traj.size(); ++i) {
        out.traj.push(leg.traj.times[i], leg.traj.state(i));
        out.modes.push_back(mode);
      }
      if (leg.status != OdeStatus::Ok) {
        out.status = leg.status;
        return out;
      }
      const std::size_t last = leg.traj.size() - 1;
      for (int i = 0; i < dim; ++i) y[static_cast<std::size_t>(i)] = leg.traj.state(last)[i];
    }
    t = t_next;
    if (t >= t_end) break;

    // jump: pick the target proportionally to its rate
    double u = rng.uniform01() * total;
    int target = -1;
    for (int j = 0; j < n_modes; ++j) {
      if (j == mode) continue;
      u -= rate_matrix[static_cast<std::size_t>(mode)][static_cast<std::size_t>(j)];
      if (u <= 0.0) {
        target = j;
        break;
      }
    }
    if (target < 0) {
      for (int j = n_modes - 1; j >= 0; --j)
        if (j != mode) {
          target = j;
          break;
        }
    }
    out.jumps.push_back({t, mode, target});
    mode = target;
    out.modes.back() = mode;  // sample at the jump time carries the new mode
  }
  out.status = OdeStatus::Ok;
  return out;
}

}  // namespace dlimit::kernel
