#pragma once

// ============================================================================
// CSV serialization. All floating-point values are printed with 17
// significant digits so files round-trip and reruns are byte-comparable.
// ============================================================================

#include <fstream>
#include <string>
#include <vector>

#include "dlimit/ode.hpp"

namespace dlimit::kernel {

/// %.17g rendering of a double.
std::string fmt17(double x);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  void header(const std::vector<std::string>& names);
  void row(const std::vector<double>& values);
  void raw_row(const std::vector<std::string>& cells);
  bool good() const { return static_cast<bool>(out_); }

 private:
  std::ofstream out_;
};

/// Header `t,x0,x1,...` followed by one row per sample.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

/// Whole-file CSV read (no quoting support; files are ours).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace dlimit::kernel
