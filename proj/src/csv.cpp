#include "dlimit/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dlimit::kernel {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::header(const std::vector<std::string>& names) {
  raw_row(names);
}

void CsvWriter::row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << fmt17(values[i]);
  }
  out_ << '\n';
}

void CsvWriter::raw_row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  CsvWriter w(path);
  std::vector<std::string> head{"t"};
  for (int i = 0; i < traj.dim; ++i) head.push_back("x" + std::to_string(i));
  w.header(head);
  std::vector<double> row(static_cast<std::size_t>(traj.dim) + 1);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    row[0] = traj.times[i];
    for (int c = 0; c < traj.dim; ++c) row[static_cast<std::size_t>(c) + 1] = traj.coord(i, c);
    w.row(row);
  }
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace dlimit::kernel
