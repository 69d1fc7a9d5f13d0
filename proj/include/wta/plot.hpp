#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wta/errors.hpp"

namespace wta {

namespace plotdetail {

struct Frame {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;  // data bounds
  double width = 800.0, height = 600.0, margin = 60.0;

  void grow(double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void pad(double frac) {
    const double dx = (x1 - x0) * frac + 1e-9;
    const double dy = (y1 - y0) * frac + 1e-9;
    x0 -= dx;
    x1 += dx;
    y0 -= dy;
    y1 += dy;
  }
  double px(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
  double py(double y) const {
    return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin);
  }
};

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream os;
  os.precision(6);
  os << "<rect x='" << f.margin << "' y='" << f.margin << "' width='" << f.width - 2 * f.margin
     << "' height='" << f.height - 2 * f.margin
     << "' fill='none' stroke='black' stroke-width='1'/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 5.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 5.0;
    os << "<text x='" << f.px(xv) << "' y='" << f.height - f.margin + 18
       << "' font-size='11' text-anchor='middle'>" << std::round(xv * 100) / 100 << "</text>\n";
    os << "<text x='" << f.margin - 8 << "' y='" << f.py(yv) + 4
       << "' font-size='11' text-anchor='end'>" << std::round(yv * 100) / 100 << "</text>\n";
  }
  os << "<text x='" << f.width / 2 << "' y='" << f.height - 12
     << "' font-size='13' text-anchor='middle'>" << xlabel << "</text>\n";
  os << "<text x='16' y='" << f.height / 2 << "' font-size='13' text-anchor='middle' "
     << "transform='rotate(-90 16 " << f.height / 2 << ")'>" << ylabel << "</text>\n";
  return os.str();
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace plotdetail

// Reward statistics against training iteration: mean polyline over a min/max
// band, read from a learning-curve CSV.
inline void plot_learning_curve(const std::string& csv_path, const std::string& svg_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open '" + csv_path + "'");
  std::string line;
  int line_no = 0;
  std::vector<double> iters, means, mins, maxs;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line.rfind("iteration,", 0) != 0)
        throw ParseError("expected learning-curve header", line_no);
      continue;
    }
    const auto cells = plotdetail::split_csv(line);
    if (cells.size() < 5) throw ParseError("short row", line_no);
    try {
      iters.push_back(std::stod(cells[0]));
      means.push_back(std::stod(cells[2]));
      mins.push_back(std::stod(cells[3]));
      maxs.push_back(std::stod(cells[4]));
    } catch (const std::exception&) {
      throw ParseError("bad number", line_no);
    }
  }

  plotdetail::Frame f;
  if (!iters.empty()) {
    f.x0 = f.x1 = iters.front();
    f.y0 = f.y1 = means.front();
    for (std::size_t i = 0; i < iters.size(); ++i) {
      f.grow(iters[i], mins[i]);
      f.grow(iters[i], maxs[i]);
    }
  }
  f.pad(0.05);

  std::ofstream out(svg_path);
  if (!out) throw ConfigError("cannot open '" + svg_path + "' for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.width << "' height='" << f.height
      << "'>\n";
  out << plotdetail::axes(f, "iteration", "rollout reward");
  if (!iters.empty()) {
    std::ostringstream band, mean_line;
    band << "<path fill='lightsteelblue' fill-opacity='0.5' stroke='none' d='M";
    for (std::size_t i = 0; i < iters.size(); ++i)
      band << f.px(iters[i]) << ' ' << f.py(maxs[i]) << (i + 1 < iters.size() ? " L" : " ");
    for (std::size_t i = iters.size(); i-- > 0;)
      band << "L" << f.px(iters[i]) << ' ' << f.py(mins[i]) << ' ';
    band << "Z'/>\n";
    out << band.str();
    mean_line << "<polyline fill='none' stroke='navy' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < iters.size(); ++i)
      mean_line << f.px(iters[i]) << ',' << f.py(means[i]) << ' ';
    mean_line << "'/>\n";
    out << mean_line.str();
  }
  out << "</svg>\n";
}

// Ground-plane engagement picture: one polyline per weapon, one disc per
// target with diameter proportional to value, destroyed targets crossed out.
// Reads the trace CSV; per-target values ride in '# value t<j> <v>' comments.
inline void plot_engagement(const std::string& trace_path, const std::string& svg_path) {
  std::ifstream in(trace_path);
  if (!in) throw ConfigError("cannot open '" + trace_path + "'");
  std::string line;
  int line_no = 0;
  std::map<std::string, std::vector<std::pair<double, double>>> paths;
  std::map<std::string, std::pair<double, double>> target_pos;
  std::map<std::string, bool> target_active;
  std::map<std::string, double> target_value;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream cs(line.substr(1));
      std::string tag, entity;
      double v;
      if (cs >> tag >> entity >> v && tag == "value") target_value[entity] = v;
      continue;
    }
    if (!have_header) {
      if (line.rfind("time,entity,", 0) != 0) throw ParseError("expected trace header", line_no);
      have_header = true;
      continue;
    }
    const auto cells = plotdetail::split_csv(line);
    if (cells.size() != 6) throw ParseError("expected 6 columns", line_no);
    try {
      const std::string& entity = cells[1];
      const double x = std::stod(cells[2]);
      const double y = std::stod(cells[3]);
      const bool active = std::stoi(cells[5]) != 0;
      if (!entity.empty() && entity[0] == 'w') {
        paths[entity].push_back({x, y});
      } else {
        target_pos[entity] = {x, y};
        target_active[entity] = active;
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("bad number", line_no);
    }
  }

  plotdetail::Frame f;
  bool first = true;
  auto grow = [&](double x, double y) {
    if (first) {
      f.x0 = f.x1 = x;
      f.y0 = f.y1 = y;
      first = false;
    } else {
      f.grow(x, y);
    }
  };
  for (const auto& [id, pts] : paths)
    for (const auto& [x, y] : pts) grow(x, y);
  for (const auto& [id, p] : target_pos) grow(p.first, p.second);
  f.pad(0.05);

  std::ofstream out(svg_path);
  if (!out) throw ConfigError("cannot open '" + svg_path + "' for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.width << "' height='" << f.height
      << "'>\n";
  out << plotdetail::axes(f, "x (m)", "y (m)");
  const char* colors[] = {"steelblue", "darkorange", "seagreen", "firebrick",
                          "mediumpurple", "sienna", "deeppink", "gray"};
  int ci = 0;
  for (const auto& [id, pts] : paths) {
    out << "<polyline fill='none' stroke='" << colors[ci++ % 8] << "' stroke-width='1' points='";
    for (const auto& [x, y] : pts) out << f.px(x) << ',' << f.py(y) << ' ';
    out << "'/>\n";
  }
  const double px_per_value = 2.0;  // radius scale: linear in value
  for (const auto& [id, p] : target_pos) {
    const double value = target_value.count(id) ? target_value[id] : 1.0;
    const bool destroyed = !target_active[id];
    out << "<circle cx='" << f.px(p.first) << "' cy='" << f.py(p.second) << "' r='"
        << value * px_per_value << "' fill='" << (destroyed ? "indianred" : "khaki")
        << "' fill-opacity='0.8' stroke='black' stroke-width='0.7'/>\n";
    if (destroyed) {
      const double r = value * px_per_value;
      out << "<line x1='" << f.px(p.first) - r << "' y1='" << f.py(p.second) - r << "' x2='"
          << f.px(p.first) + r << "' y2='" << f.py(p.second) + r
          << "' stroke='black' stroke-width='1'/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace wta
