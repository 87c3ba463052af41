#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "stgat/errors.hpp"

namespace stgat {

// Polylines for one plotted window: per fighter, the observed history, the
// real future and the predicted future, all in absolute km.
struct TrajectoryPlot {
  std::vector<std::vector<std::array<double, 3>>> history;
  std::vector<std::vector<std::array<double, 3>>> truth;
  std::vector<std::vector<std::array<double, 3>>> prediction;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Panel {
  double min_u = std::numeric_limits<double>::infinity();
  double max_u = -std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  double x0 = 0, y0 = 0, w = 460, h = 380;

  void expand(double u, double v) {
    min_u = std::min(min_u, u);
    max_u = std::max(max_u, u);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  void finalize() {
    const double du = std::max(max_u - min_u, 1e-6);
    const double dv = std::max(max_v - min_v, 1e-6);
    min_u -= 0.05 * du;
    max_u += 0.05 * du;
    min_v -= 0.05 * dv;
    max_v += 0.05 * dv;
  }
  double px(double u) const {
    return x0 + (u - min_u) / (max_u - min_u) * w;
  }
  double py(double v) const {
    return y0 + h - (v - min_v) / (max_v - min_v) * h;
  }
};

inline void emit_polyline(std::string& svg, const Panel& p,
                          const std::vector<std::array<double, 3>>& pts,
                          int axis_v, const char* color, bool dashed) {
  if (pts.empty()) return;
  svg += "  <polyline fill=\"none\" stroke=\"";
  svg += color;
  svg += "\" stroke-width=\"1.5\"";
  if (dashed) svg += " stroke-dasharray=\"6,4\"";
  svg += " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) svg += ' ';
    svg += fmt2(p.px(pts[i][0]));
    svg += ',';
    svg += fmt2(p.py(pts[i][axis_v]));
  }
  svg += "\"/>\n";
}

}  // namespace detail

inline constexpr const char* kHistoryColor = "#d62728";     // red
inline constexpr const char* kTruthColor = "#1f77b4";       // blue
inline constexpr const char* kPredictionColor = "#2ca02c";  // green, dashed

// Two 2D projections of the 3D scene: top-down (x vs y) on the left,
// altitude profile (x vs z) on the right. History red, real future blue,
// predicted future green dashed.
inline void write_trajectory_svg(const std::string& path,
                                 const TrajectoryPlot& plot) {
  detail::Panel top, profile;
  top.x0 = 50;
  top.y0 = 40;
  profile.x0 = 50 + 520;
  profile.y0 = 40;
  auto expand_all =
      [&](const std::vector<std::vector<std::array<double, 3>>>& group) {
        for (const auto& line : group) {
          for (const auto& pt : line) {
            top.expand(pt[0], pt[1]);
            profile.expand(pt[0], pt[2]);
          }
        }
      };
  expand_all(plot.history);
  expand_all(plot.truth);
  expand_all(plot.prediction);
  top.finalize();
  profile.finalize();

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1060\" "
         "height=\"470\" viewBox=\"0 0 1060 470\">\n";
  svg += "  <rect width=\"1060\" height=\"470\" fill=\"white\"/>\n";
  for (const detail::Panel* p : {&top, &profile}) {
    svg += "  <rect x=\"" + detail::fmt2(p->x0) + "\" y=\"" +
           detail::fmt2(p->y0) + "\" width=\"" + detail::fmt2(p->w) +
           "\" height=\"" + detail::fmt2(p->h) +
           "\" fill=\"none\" stroke=\"#888\"/>\n";
  }
  svg += "  <text x=\"260\" y=\"25\" font-family=\"sans-serif\" "
         "font-size=\"14\">top-down: x_km vs y_km</text>\n";
  svg += "  <text x=\"780\" y=\"25\" font-family=\"sans-serif\" "
         "font-size=\"14\">profile: x_km vs z_km</text>\n";
  svg += "  <text x=\"50\" y=\"452\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"" + std::string(kHistoryColor) +
         "\">history</text>\n";
  svg += "  <text x=\"120\" y=\"452\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"" + std::string(kTruthColor) +
         "\">real future</text>\n";
  svg += "  <text x=\"210\" y=\"452\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"" + std::string(kPredictionColor) +
         "\">predicted future (dashed)</text>\n";

  for (const auto& line : plot.history) {
    detail::emit_polyline(svg, top, line, 1, kHistoryColor, false);
    detail::emit_polyline(svg, profile, line, 2, kHistoryColor, false);
  }
  for (const auto& line : plot.truth) {
    detail::emit_polyline(svg, top, line, 1, kTruthColor, false);
    detail::emit_polyline(svg, profile, line, 2, kTruthColor, false);
  }
  for (const auto& line : plot.prediction) {
    detail::emit_polyline(svg, top, line, 1, kPredictionColor, true);
    detail::emit_polyline(svg, profile, line, 2, kPredictionColor, true);
  }
  svg += "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << svg;
  if (!out) throw io_error("failed writing " + path);
}

// Raw polyline data behind the figure, one row per point.
inline void write_plot_csv(const std::string& path,
                           const TrajectoryPlot& plot) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << "role,fighter,step,x_km,y_km,z_km\n";
  auto dump = [&](const char* role,
                  const std::vector<std::vector<std::array<double, 3>>>& group) {
    char buf[160];
    for (std::size_t f = 0; f < group.size(); ++f) {
      for (std::size_t k = 0; k < group[f].size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.17g,%.17g,%.17g\n",
                      role, f, k, group[f][k][0], group[f][k][1],
                      group[f][k][2]);
        out << buf;
      }
    }
  };
  dump("history", plot.history);
  dump("truth", plot.truth);
  dump("prediction", plot.prediction);
  if (!out) throw io_error("failed writing " + path);
}

}  // namespace stgat
