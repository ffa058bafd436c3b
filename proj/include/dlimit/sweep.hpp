#pragma once

// ============================================================================
// Parameter-plane sweep engine: evaluate a labelled property on a log-spaced
// grid over the positive quadrant, extract region boundaries, fit scaling
// laws (power law, and an exponential law for exponentially thin wedges),
// and render classification diagrams as CSV + SVG.
// ============================================================================

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dlimit/types.hpp"

namespace dlimit::sweep {

struct GridSpec {
  double x_min = 0.01, x_max = 1.0;
  double y_min = 0.01, y_max = 1.0;
  int nx = 20, ny = 20;
  bool log_spacing = true;
  std::string x_name = "eps";
  std::string y_name = "delta";

  std::vector<double> xs() const;
  std::vector<double> ys() const;
  void validate() const;
};

/// Labels for the singular axes and the origin; a label of "NotDefined"
/// renders the corresponding axis dashed.
struct AxisRules {
  std::string x_axis = "NotDefined";  ///< second component -> 0
  std::string y_axis = "NotDefined";  ///< first component -> 0
  std::string origin = "NotDefined";
};

struct PropertyEvaluator {
  std::string name;
  std::vector<std::string> label_set;
  /// point -> label; stochastic evaluators must draw all randomness from the
  /// supplied per-point seed. May return "Ambiguous"; throws become
  /// "Ambiguous" with a log entry.
  std::function<std::string(const ParamPoint&, std::uint64_t)> evaluate;
  AxisRules axis_rules;
};

struct ClassificationDiagram {
  GridSpec grid;
  std::vector<std::string> labels;  ///< row-major: index = iy * nx + ix
  std::vector<std::string> label_set;
  AxisRules axis_labels;
  std::string evaluator_name;
  std::uint64_t base_seed = 0;
  std::vector<std::string> log;  ///< per-point evaluator failures

  const std::string& label_at(int ix, int iy) const {
    return labels[static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid.nx) +
                  static_cast<std::size_t>(ix)];
  }
};

struct PowerLawFit {
  double kappa = 0.0;    ///< y = kappa * x^p
  double p = 0.0;
  double p_stderr = 0.0;
  double residual = 0.0;  ///< RMS in log space
  int support = 0;
  bool low_support = false;  ///< fewer than 5 boundary points
};

struct ExpLawFit {
  double c = 0.0;  ///< log x = c - H / (2 y^2)
  double H = 0.0;
  double residual = 0.0;
  int support = 0;
  bool low_support = false;
};

/// Curve overlay for render(): "powerlaw" y = a*x^b, or "explaw"
/// x = exp(a - b/(2 y^2)).
struct FitCurve {
  std::string model;
  double a = 0.0, b = 0.0;
};

ClassificationDiagram run_sweep(const PropertyEvaluator& ev, const GridSpec& grid,
                                std::uint64_t base_seed, int parallelism = 1);

/// Per grid column (fixed x), the geometric mean of the adjacent cells where
/// the label switches between a and b while scanning y upward. "Ambiguous"
/// and foreign labels are skipped. Columns without a transition are omitted;
/// throws NumericalError("NoBoundary") if no column has one.
std::vector<std::pair<double, double>> extract_boundary(
    const ClassificationDiagram& d, const std::string& label_a,
    const std::string& label_b);

/// Least squares of log y on log x. Throws InputError for fewer than 3
/// points or nonpositive coordinates, NumericalError("Degenerate") when all
/// x coincide.
PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& pts);

/// Least squares of log x on 1/(2 y^2): log x = c - H/(2 y^2).
ExpLawFit fit_exp_law(const std::vector<std::pair<double, double>>& pts);

/// Writes <stem>.csv (long form: eps,delta,label) and <stem>.svg (one group
/// per region, fitted curves, dashed NotDefined axes).
void render(const ClassificationDiagram& d, const std::vector<FitCurve>& fits,
            const std::string& stem);

/// Rebuilds a diagram from the long-form CSV (grid inferred from the
/// coordinate values). Inverse of the CSV half of render().
ClassificationDiagram read_diagram_csv(const std::string& path);

}  // namespace dlimit::sweep
