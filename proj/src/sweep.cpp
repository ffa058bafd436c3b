#include "dlimit/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dlimit/csv.hpp"
#include "dlimit/parallel.hpp"
#include "dlimit/rng.hpp"

namespace dlimit::sweep {

namespace {

std::vector<double> spaced(double lo, double hi, int n, bool log_spacing) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  if (log_spacing) {
    const double l0 = std::log(lo), l1 = std::log(hi);
    for (int i = 0; i < n; ++i)
      v[static_cast<std::size_t>(i)] = std::exp(l0 + (l1 - l0) * i / (n - 1));
    v.front() = lo;
    v.back() = hi;
  } else {
    for (int i = 0; i < n; ++i)
      v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  }
  return v;
}

}  // namespace

std::vector<double> GridSpec::xs() const { return spaced(x_min, x_max, nx, log_spacing); }
std::vector<double> GridSpec::ys() const { return spaced(y_min, y_max, ny, log_spacing); }

void GridSpec::validate() const {
  if (!(x_min > 0) || !(y_min > 0) || !(x_max >= x_min) || !(y_max >= y_min))
    throw InputError("BadGrid", "grid ranges must be positive and ordered");
  if (nx < 1 || ny < 1) throw InputError("BadGrid", "grid must have >= 1 point per axis");
}

ClassificationDiagram run_sweep(const PropertyEvaluator& ev, const GridSpec& grid,
                                std::uint64_t base_seed, int parallelism) {
  grid.validate();
  ClassificationDiagram d;
  d.grid = grid;
  d.label_set = ev.label_set;
  d.axis_labels = ev.axis_rules;
  d.evaluator_name = ev.name;
  d.base_seed = base_seed;
  const auto xs = grid.xs();
  const auto ys = grid.ys();
  const std::size_t n = xs.size() * ys.size();
  d.labels.assign(n, std::string());
  std::vector<std::string> errs(n);

  kernel::parallel_for(n, parallelism, [&](std::size_t idx) {
    const int ix = static_cast<int>(idx % static_cast<std::size_t>(grid.nx));
    const int iy = static_cast<int>(idx / static_cast<std::size_t>(grid.nx));
    const ParamPoint p{xs[static_cast<std::size_t>(ix)], ys[static_cast<std::size_t>(iy)]};
    const std::uint64_t seed = kernel::derive_seed(base_seed, idx);
    try {
      d.labels[idx] = ev.evaluate(p, seed);
    } catch (const std::exception& e) {
      d.labels[idx] = "Ambiguous";
      errs[idx] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!errs[i].empty()) {
      std::ostringstream os;
      os << ev.name << " at (" << kernel::fmt17(xs[i % static_cast<std::size_t>(grid.nx)])
         << ", " << kernel::fmt17(ys[i / static_cast<std::size_t>(grid.nx)])
         << "): " << errs[i];
      d.log.push_back(os.str());
    }
  return d;
}

std::vector<std::pair<double, double>> extract_boundary(
    const ClassificationDiagram& d, const std::string& label_a,
    const std::string& label_b) {
  const auto xs = d.grid.xs();
  const auto ys = d.grid.ys();
  std::vector<std::pair<double, double>> pts;
  for (int ix = 0; ix < d.grid.nx; ++ix) {
    int prev = -1;  // index into ys of the previous a/b-labelled cell
    for (int iy = 0; iy < d.grid.ny; ++iy) {
      const std::string& lab = d.label_at(ix, iy);
      if (lab != label_a && lab != label_b) continue;
      if (prev >= 0) {
        const std::string& plab = d.label_at(ix, prev);
        if (plab != lab) {
          pts.emplace_back(xs[static_cast<std::size_t>(ix)],
                           std::sqrt(ys[static_cast<std::size_t>(prev)] *
                                     ys[static_cast<std::size_t>(iy)]));
          break;
        }
      }
      prev = iy;
    }
  }
  if (pts.empty())
    throw NumericalError("NoBoundary", "extract_boundary: no column has an adjacent " +
                                           label_a + "/" + label_b + " transition");
  return pts;
}

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3)
    throw InputError("TooFewPoints", "fit_power_law: need at least 3 points");
  const auto n = static_cast<double>(pts.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : pts) {
    if (!(x > 0) || !(y > 0))
      throw InputError("BadPoint", "fit_power_law: coordinates must be positive");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    const double dx = std::log(x) - mx, dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (sxx < 1e-24)
    throw NumericalError("Degenerate", "fit_power_law: points collinear in one variable");
  PowerLawFit fit;
  fit.p = sxy / sxx;
  fit.kappa = std::exp(my - fit.p * mx);
  fit.support = static_cast<int>(pts.size());
  fit.low_support = fit.support < 5;
  double ss = 0;
  for (const auto& [x, y] : pts) {
    const double r = std::log(y) - (std::log(fit.kappa) + fit.p * std::log(x));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.p_stderr = pts.size() > 2 ? std::sqrt(ss / (n - 2.0) / sxx) : 0.0;
  return fit;
}

ExpLawFit fit_exp_law(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3)
    throw InputError("TooFewPoints", "fit_exp_law: need at least 3 points");
  const auto n = static_cast<double>(pts.size());
  double su = 0, sv = 0;
  for (const auto& [x, y] : pts) {
    if (!(x > 0) || !(y > 0))
      throw InputError("BadPoint", "fit_exp_law: coordinates must be positive");
    su += 1.0 / (2.0 * y * y);
    sv += std::log(x);
  }
  const double mu = su / n, mv = sv / n;
  double suu = 0, suv = 0;
  for (const auto& [x, y] : pts) {
    const double du = 1.0 / (2.0 * y * y) - mu, dv = std::log(x) - mv;
    suu += du * du;
    suv += du * dv;
  }
  if (suu < 1e-24)
    throw NumericalError("Degenerate", "fit_exp_law: points collinear in one variable");
  ExpLawFit fit;
  fit.H = -suv / suu;
  fit.c = mv + fit.H * mu;
  fit.support = static_cast<int>(pts.size());
  fit.low_support = fit.support < 5;
  double ss = 0;
  for (const auto& [x, y] : pts) {
    const double r = std::log(x) - (fit.c - fit.H / (2.0 * y * y));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f",
                          "#956cb4", "#8c613c", "#dc7ec0", "#d5bb67",
                          "#82c6e2", "#797979"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string color_for(const std::vector<std::string>& label_set,
                      const std::string& label) {
  if (label == "Ambiguous") return "#bbbbbb";
  if (label == "NotDefined") return "#eeeeee";
  for (std::size_t i = 0; i < label_set.size(); ++i)
    if (label_set[i] == label)
      return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
  return "#000000";
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct LogMap {
  double lo, hi;    // data range (edges)
  double p0, p1;    // pixel range
  double operator()(double v) const {
    const double t = (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
    return p0 + t * (p1 - p0);
  }
};

}  // namespace

void render(const ClassificationDiagram& d, const std::vector<FitCurve>& fits,
            const std::string& stem) {
  const auto xs = d.grid.xs();
  const auto ys = d.grid.ys();

  {  // CSV, long form
    kernel::CsvWriter w(stem + ".csv");
    w.header({"eps", "delta", "label"});
    for (int iy = 0; iy < d.grid.ny; ++iy)
      for (int ix = 0; ix < d.grid.nx; ++ix)
        w.raw_row({kernel::fmt17(xs[static_cast<std::size_t>(ix)]),
                   kernel::fmt17(ys[static_cast<std::size_t>(iy)]),
                   d.label_at(ix, iy)});
  }

  // cell edges (geometric midpoints, half-cell margins at the ends)
  auto edges = [](const std::vector<double>& v) {
    std::vector<double> e(v.size() + 1);
    if (v.size() == 1) {
      e[0] = v[0] / 1.2;
      e[1] = v[0] * 1.2;
      return e;
    }
    for (std::size_t i = 1; i < v.size(); ++i) e[i] = std::sqrt(v[i - 1] * v[i]);
    const double r0 = v[1] / v[0], r1 = v.back() / v[v.size() - 2];
    e[0] = v[0] / std::sqrt(r0);
    e[v.size()] = v.back() * std::sqrt(r1);
    return e;
  };
  const auto xe = edges(xs), ye = edges(ys);

  constexpr double W = 760, H = 560, ml = 80, mr = 200, mt = 30, mb = 70;
  const LogMap mapx{xe.front(), xe.back(), ml, W - mr};
  const LogMap mapy{ye.front(), ye.back(), H - mb, mt};  // y grows upward

  std::ofstream svg(stem + ".svg");
  if (!svg) throw DlimitError("IO", "render: cannot open " + stem + ".svg");
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H
      << "\" fill=\"#ffffff\"/>\n";

  // region groups: one <g> per label actually present
  std::vector<std::string> present;
  for (const auto& lab : d.labels)
    if (std::find(present.begin(), present.end(), lab) == present.end())
      present.push_back(lab);
  for (const auto& lab : present) {
    svg << "<g id=\"region-" << xml_escape(lab) << "\" fill=\""
        << color_for(d.label_set, lab) << "\">\n";
    for (int iy = 0; iy < d.grid.ny; ++iy)
      for (int ix = 0; ix < d.grid.nx; ++ix) {
        if (d.label_at(ix, iy) != lab) continue;
        const double x0 = mapx(xe[static_cast<std::size_t>(ix)]);
        const double x1 = mapx(xe[static_cast<std::size_t>(ix) + 1]);
        const double y1 = mapy(ye[static_cast<std::size_t>(iy)]);
        const double y0 = mapy(ye[static_cast<std::size_t>(iy) + 1]);
        svg << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\""
            << num(x1 - x0) << "\" height=\"" << num(y1 - y0) << "\"/>\n";
      }
    svg << "</g>\n";
  }

  // fitted curves
  for (const auto& fit : fits) {
    svg << "<path fill=\"none\" stroke=\"#111111\" stroke-width=\"2\" d=\"";
    bool pen_down = false;
    const int samples = 200;
    for (int i = 0; i <= samples; ++i) {
      double px, py;
      if (fit.model == "explaw") {
        const double y = ye.front() * std::pow(ye.back() / ye.front(),
                                               static_cast<double>(i) / samples);
        const double x = std::exp(fit.a - fit.b / (2.0 * y * y));
        px = x;
        py = y;
      } else {
        const double x = xe.front() * std::pow(xe.back() / xe.front(),
                                               static_cast<double>(i) / samples);
        px = x;
        py = fit.a * std::pow(x, fit.b);
      }
      if (px < xe.front() || px > xe.back() || py < ye.front() || py > ye.back()) {
        pen_down = false;
        continue;
      }
      svg << (pen_down ? 'L' : 'M') << num(mapx(px)) << ' ' << num(mapy(py)) << ' ';
      pen_down = true;
    }
    svg << "\"/>\n";
  }

  // frame; singular axes drawn dashed when NotDefined
  const bool dash_left = d.axis_labels.y_axis == "NotDefined";
  const bool dash_bottom = d.axis_labels.x_axis == "NotDefined";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << (H - mb) << "\" stroke=\"#000000\" stroke-width=\"1.5\""
      << (dash_left ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << (H - mb) << "\" x2=\"" << (W - mr)
      << "\" y2=\"" << (H - mb) << "\" stroke=\"#000000\" stroke-width=\"1.5\""
      << (dash_bottom ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";

  // decade ticks
  auto ticks = [&](double lo, double hi) {
    std::vector<double> t;
    for (int e = static_cast<int>(std::floor(std::log10(lo))) - 1;
         e <= static_cast<int>(std::ceil(std::log10(hi))) + 1; ++e) {
      const double v = std::pow(10.0, e);
      if (v >= lo * 0.999 && v <= hi * 1.001) t.push_back(v);
    }
    return t;
  };
  for (double v : ticks(xe.front(), xe.back())) {
    const double px = mapx(v);
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << (H - mb) << "\" x2=\""
        << num(px) << "\" y2=\"" << (H - mb + 6) << "\" stroke=\"#000000\"/>\n";
    svg << "<text x=\"" << num(px) << "\" y=\"" << (H - mb + 22)
        << "\" font-size=\"12\" text-anchor=\"middle\">1e"
        << static_cast<int>(std::round(std::log10(v))) << "</text>\n";
  }
  for (double v : ticks(ye.front(), ye.back())) {
    const double py = mapy(v);
    svg << "<line x1=\"" << (ml - 6) << "\" y1=\"" << num(py) << "\" x2=\"" << ml
        << "\" y2=\"" << num(py) << "\" stroke=\"#000000\"/>\n";
    svg << "<text x=\"" << (ml - 10) << "\" y=\"" << num(py + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">1e"
        << static_cast<int>(std::round(std::log10(v))) << "</text>\n";
  }

  // axis names + axis rules
  svg << "<text x=\"" << (ml + (W - mr - ml) / 2) << "\" y=\"" << (H - mb + 45)
      << "\" font-size=\"15\" text-anchor=\"middle\">" << xml_escape(d.grid.x_name)
      << "</text>\n";
  svg << "<text x=\"22\" y=\"" << (mt + (H - mb - mt) / 2)
      << "\" font-size=\"15\" text-anchor=\"middle\" transform=\"rotate(-90 22 "
      << (mt + (H - mb - mt) / 2) << ")\">" << xml_escape(d.grid.y_name)
      << "</text>\n";
  svg << "<text x=\"" << ml << "\" y=\"" << (H - 18) << "\" font-size=\"11\">"
      << xml_escape(d.grid.y_name + "=0 axis: " + d.axis_labels.x_axis + ", " +
                    d.grid.x_name + "=0 axis: " + d.axis_labels.y_axis +
                    ", origin: " + d.axis_labels.origin)
      << "</text>\n";

  // legend
  double ly = mt + 10;
  svg << "<text x=\"" << (W - mr + 16) << "\" y=\"" << num(ly)
      << "\" font-size=\"13\" font-weight=\"bold\">" << xml_escape(d.evaluator_name)
      << "</text>\n";
  ly += 12;
  for (const auto& lab : present) {
    svg << "<rect x=\"" << (W - mr + 16) << "\" y=\"" << num(ly) << "\" width=\"14\""
        << " height=\"14\" fill=\"" << color_for(d.label_set, lab) << "\"/>\n";
    svg << "<text x=\"" << (W - mr + 36) << "\" y=\"" << num(ly + 12)
        << "\" font-size=\"12\">" << xml_escape(lab) << "</text>\n";
    ly += 20;
  }
  svg << "</svg>\n";
}

ClassificationDiagram read_diagram_csv(const std::string& path) {
  const auto rows = kernel::read_csv(path);
  if (rows.size() < 2 || rows[0] != std::vector<std::string>{"eps", "delta", "label"})
    throw InputError("BadDiagramCsv", "read_diagram_csv: unexpected header in " + path);

  ClassificationDiagram d;
  std::vector<double> xs, ys;
  auto find_or_add = [](std::vector<double>& v, double val) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] == val) return i;
    v.push_back(val);
    return v.size() - 1;
  };
  std::vector<std::string> labels;
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3)
      throw InputError("BadDiagramCsv", "read_diagram_csv: malformed row");
    const double x = std::strtod(rows[r][0].c_str(), nullptr);
    const double y = std::strtod(rows[r][1].c_str(), nullptr);
    coords.emplace_back(find_or_add(xs, x), find_or_add(ys, y));
    labels.push_back(rows[r][2]);
  }
  d.grid.nx = static_cast<int>(xs.size());
  d.grid.ny = static_cast<int>(ys.size());
  d.grid.x_min = xs.front();
  d.grid.x_max = xs.back();
  d.grid.y_min = ys.front();
  d.grid.y_max = ys.back();
  if (labels.size() != xs.size() * ys.size())
    throw InputError("BadDiagramCsv", "read_diagram_csv: incomplete grid");
  // spacing: compare the second sample against both hypotheses
  if (xs.size() > 2) {
    const double lin = xs.front() + (xs.back() - xs.front()) / (d.grid.nx - 1);
    const double lg = xs.front() * std::pow(xs.back() / xs.front(), 1.0 / (d.grid.nx - 1));
    d.grid.log_spacing = std::abs(xs[1] - lg) <= std::abs(xs[1] - lin);
  }
  d.labels.assign(labels.size(), std::string());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d.labels[coords[i].second * xs.size() + coords[i].first] = labels[i];
    if (std::find(d.label_set.begin(), d.label_set.end(), labels[i]) == d.label_set.end())
      d.label_set.push_back(labels[i]);
  }
  return d;
}

}  // namespace dlimit::sweep
