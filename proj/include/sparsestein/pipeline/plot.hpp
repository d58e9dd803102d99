#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sparsestein/error.hpp"
#include "sparsestein/pipeline/table.hpp"

namespace sparsestein::pipeline {

enum class PlotKind { Line, Band };

struct PlotOptions {
  PlotKind kind = PlotKind::Line;
  std::string x;                  // empty selects the first column
  std::vector<std::string> y;     // line plots: empty selects every other column
  std::string mean = "mean";      // band plots
  std::string stdev = "stdev";    // band plots
  std::vector<std::string> overlay;  // band plots: extra dashed lines
  bool log_x = false;
  std::string title;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out.push_back(c);
  }
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  return colors[i % 7];
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_x;
  static constexpr double left = 70, right = 20, top = 40, bottom = 50, width = 640, height = 400;

  double px(double x) const {
    const double t = log_x ? (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0)) : (x - x0) / (x1 - x0);
    return left + t * (width - left - right);
  }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
}

inline std::string polyline(const Frame& f, const std::vector<double>& x, const std::vector<double>& y,
                            const char* color, bool dashed) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || (f.log_x && !(x[i] > 0.0))) continue;
    if (!pts.empty()) pts += ' ';
    pts += fmt(f.px(x[i])) + "," + fmt(f.py(y[i]));
  }
  return "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
         (dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts + "\"/>\n";
}

}  // namespace detail

/// Deterministic SVG rendering of table columns against one x column.
inline std::string render_svg(const Table& t, const PlotOptions& opt) {
  using detail::fmt;
  if (t.rows.empty()) throw ParseError("table has no rows to plot");
  const std::size_t xc = opt.x.empty() ? 0 : t.column(opt.x);
  const std::vector<double> x = t.values(xc);

  struct Series {
    std::string name;
    std::vector<double> y;
    bool dashed;
  };
  std::vector<Series> lines;
  std::vector<double> band_lo, band_hi;
  if (opt.kind == PlotKind::Line) {
    if (opt.y.empty()) {
      for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (c != xc) lines.push_back({t.columns[c], t.values(c), false});
    } else {
      for (const auto& name : opt.y) lines.push_back({name, t.values(t.column(name)), false});
    }
  } else {
    const auto mean = t.values(t.column(opt.mean));
    const auto sd = t.values(t.column(opt.stdev));
    for (std::size_t i = 0; i < mean.size(); ++i) {
      band_lo.push_back(mean[i] - 2.0 * sd[i]);
      band_hi.push_back(mean[i] + 2.0 * sd[i]);
    }
    lines.push_back({opt.mean, mean, false});
    for (const auto& name : opt.overlay) lines.push_back({name, t.values(t.column(name)), true});
  }
  if (lines.empty()) throw ParseError("table has no columns to plot");

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto take_x = [&](double v) {
    if (std::isfinite(v) && (!opt.log_x || v > 0.0)) {
      x0 = std::min(x0, v);
      x1 = std::max(x1, v);
    }
  };
  auto take_y = [&](double v) {
    if (std::isfinite(v)) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  };
  for (double v : x) take_x(v);
  for (const auto& s : lines)
    for (double v : s.y) take_y(v);
  for (double v : band_lo) take_y(v);
  for (double v : band_hi) take_y(v);
  if (!std::isfinite(x0) || !std::isfinite(y0)) throw ParseError("table has no finite points to plot");
  if (opt.log_x && !(x1 > x0)) {
    x0 /= 2.0;
    x1 *= 2.0;
  } else if (!opt.log_x) {
    detail::widen(x0, x1);
  }
  detail::widen(y0, y1);
  const detail::Frame f{x0, x1, y0, y1, opt.log_x};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(f.width) << "\" height=\"" << fmt(f.height)
      << "\" viewBox=\"0 0 " << fmt(f.width) << " " << fmt(f.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << fmt(f.width / 2) << "\" y=\"20\" text-anchor=\"middle\">" << detail::escape(opt.title)
        << "</text>\n";
  const double plot_right = f.width - f.right, plot_bottom = f.height - f.bottom;
  svg << "<rect x=\"" << fmt(f.left) << "\" y=\"" << fmt(f.top) << "\" width=\"" << fmt(plot_right - f.left)
      << "\" height=\"" << fmt(plot_bottom - f.top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = opt.log_x ? std::pow(10.0, std::log10(x0) + k * (std::log10(x1) - std::log10(x0)) / 4.0)
                                : x0 + k * (x1 - x0) / 4.0;
    const double yv = y0 + k * (y1 - y0) / 4.0;
    svg << "<text x=\"" << fmt(f.px(xv)) << "\" y=\"" << fmt(plot_bottom + 16) << "\" text-anchor=\"middle\">"
        << detail::fmt_tick(xv) << "</text>\n";
    svg << "<text x=\"" << fmt(f.left - 6) << "\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\">"
        << detail::fmt_tick(yv) << "</text>\n";
  }
  svg << "<text x=\"" << fmt((f.left + plot_right) / 2) << "\" y=\"" << fmt(f.height - 12)
      << "\" text-anchor=\"middle\">" << detail::escape(t.columns[xc]) << "</text>\n";
  if (!band_lo.empty()) {
    std::string pts;
    for (std::size_t i = 0; i < x.size(); ++i) pts += fmt(f.px(x[i])) + "," + fmt(f.py(band_hi[i])) + " ";
    for (std::size_t i = x.size(); i-- > 0;) pts += fmt(f.px(x[i])) + "," + fmt(f.py(band_lo[i])) + (i ? " " : "");
    svg << "<polygon fill=\"" << detail::palette(0) << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"" << pts
        << "\"/>\n";
  }
  for (std::size_t s = 0; s < lines.size(); ++s) {
    svg << detail::polyline(f, x, lines[s].y, detail::palette(s), lines[s].dashed);
    const double ly = f.top + 14 + 14 * static_cast<double>(s);
    svg << "<text x=\"" << fmt(plot_right - 8) << "\" y=\"" << fmt(ly) << "\" text-anchor=\"end\" fill=\""
        << detail::palette(s) << "\">" << detail::escape(lines[s].name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void emit_plot(const std::string& table_path, const std::string& svg_path, const PlotOptions& opt) {
  const std::string svg = render_svg(load_table(table_path), opt);
  std::ofstream f(svg_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + svg_path + "' for writing");
  f << svg;
}

}  // namespace sparsestein::pipeline
