#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace epi {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool step = false;        // render as a step function (controls)
  bool right_axis = false;  // use the secondary y axis
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmtg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;

  void fit(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  static Axis of(const std::vector<const std::vector<double>*>& cols) {
    Axis a{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto* c : cols)
      for (double v : *c) a.fit(v);
    if (!(a.lo < a.hi)) {
      a.lo -= 0.5;
      a.hi += 0.5;
    }
    return a;
  }
  double tick_step() const {
    const double span = hi - lo;
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double mult : {1.0, 2.0, 5.0, 10.0})
      if (raw <= mult * mag) return mult * mag;
    return 10.0 * mag;
  }
};

inline const char* palette(int j) {
  static const char* colors[] = {"#1f6fb4", "#d1493e", "#3c9d50", "#8458a8",
                                 "#c97f1e", "#3aa6a6", "#99527d", "#666666"};
  return colors[j % 8];
}

}  // namespace detail

// Deterministic SVG line chart on a fixed canvas. Identical input produces a
// byte-identical document. Step series are drawn as staircases; series marked
// right_axis get the secondary scale (controls next to trajectories).
inline std::string emit_plot(const std::vector<PlotSeries>& series, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::string& y2_label = "") {
  if (series.empty()) throw std::invalid_argument("emit_plot: no series");
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw std::invalid_argument("emit_plot: empty or ragged series '" + s.label + "'");
  }
  const double width = 860, height = 520;
  const double ml = 64, mr = y2_label.empty() ? 24 : 64, mt = 42, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;

  std::vector<const std::vector<double>*> xs, ys, ys2;
  for (const auto& s : series) {
    xs.push_back(&s.x);
    (s.right_axis ? ys2 : ys).push_back(&s.y);
  }
  const detail::Axis ax = detail::Axis::of(xs);
  const detail::Axis ay = ys.empty() ? detail::Axis{0, 1} : detail::Axis::of(ys);
  const detail::Axis ay2 = ys2.empty() ? detail::Axis{0, 1} : detail::Axis::of(ys2);

  auto sx = [&](double v) { return ml + (v - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto sy = [&](double v) { return mt + ph - (v - ay.lo) / (ay.hi - ay.lo) * ph; };
  auto sy2 = [&](double v) { return mt + ph - (v - ay2.lo) / (ay2.hi - ay2.lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
        "text-anchor=\"middle\">"
     << title << "</text>\n";

  // Frame and ticks.
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  const double tx = ax.tick_step();
  for (double v = std::ceil(ax.lo / tx) * tx; v <= ax.hi + 1e-12; v += tx) {
    os << "<line x1=\"" << detail::fmt2(sx(v)) << "\" y1=\"" << mt + ph << "\" x2=\""
       << detail::fmt2(sx(v)) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#333333\"/>\n";
    os << "<text x=\"" << detail::fmt2(sx(v)) << "\" y=\"" << mt + ph + 18
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
       << detail::fmtg(v) << "</text>\n";
  }
  const double ty = ay.tick_step();
  for (double v = std::ceil(ay.lo / ty) * ty; v <= ay.hi + 1e-12; v += ty) {
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt2(sy(v)) << "\" x2=\"" << ml
       << "\" y2=\"" << detail::fmt2(sy(v)) << "\" stroke=\"#333333\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt2(sy(v) + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << detail::fmtg(v)
       << "</text>\n";
  }
  if (!ys2.empty()) {
    const double ty2 = ay2.tick_step();
    for (double v = std::ceil(ay2.lo / ty2) * ty2; v <= ay2.hi + 1e-12; v += ty2) {
      os << "<line x1=\"" << ml + pw << "\" y1=\"" << detail::fmt2(sy2(v)) << "\" x2=\""
         << ml + pw + 5 << "\" y2=\"" << detail::fmt2(sy2(v)) << "\" stroke=\"#333333\"/>\n";
      os << "<text x=\"" << ml + pw + 8 << "\" y=\"" << detail::fmt2(sy2(v) + 4)
         << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"start\">"
         << detail::fmtg(v) << "</text>\n";
    }
  }

  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 "
        "16 "
     << mt + ph / 2 << ")\">" << y_label << "</text>\n";
  if (!y2_label.empty())
    os << "<text x=\"" << width - 14 << "\" y=\"" << mt + ph / 2
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(90 "
       << width - 14 << " " << mt + ph / 2 << ")\">" << y2_label << "</text>\n";

  // Series.
  for (std::size_t j = 0; j < series.size(); ++j) {
    const auto& s = series[j];
    auto project_y = [&](double v) { return s.right_axis ? sy2(v) : sy(v); };
    os << "<polyline fill=\"none\" stroke=\"" << detail::palette(static_cast<int>(j))
       << "\" stroke-width=\"1.6\"" << (s.right_axis ? " stroke-dasharray=\"6 3\"" : "")
       << " points=\"";
    for (std::size_t m = 0; m < s.x.size(); ++m) {
      if (s.step && m > 0)
        os << detail::fmt2(sx(s.x[m])) << "," << detail::fmt2(project_y(s.y[m - 1])) << " ";
      os << detail::fmt2(sx(s.x[m])) << "," << detail::fmt2(project_y(s.y[m]));
      if (m + 1 < s.x.size()) os << " ";
    }
    os << "\"/>\n";
  }

  // Legend.
  for (std::size_t j = 0; j < series.size(); ++j) {
    const double ly = mt + 14 + 16 * static_cast<double>(j);
    os << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw - 126
       << "\" y2=\"" << ly << "\" stroke=\"" << detail::palette(static_cast<int>(j))
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[j].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace epi
