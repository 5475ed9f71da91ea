#pragma once

// Minimal static SVG charts: overlaid line series and histograms.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "posture/error.hpp"

namespace posture::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 900;
  int height = 420;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double left = 70, right = 20, top = 36, bottom = 50;
  int w, h;
  [[nodiscard]] double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  [[nodiscard]] double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double m = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
    lo -= m;
    hi += m;
  }
}

inline void frame_svg(std::ostringstream& s, const Frame& f, const Axes& ax, bool log_y) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.w << "\" height=\"" << f.h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << f.w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(ax.title) << "</text>\n"
    << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.w - f.left - f.right << "\" height=\""
    << f.h - f.top - f.bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 5.0, yv = f.y0 + (f.y1 - f.y0) * i / 5.0;
    s << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << f.h - f.bottom + 16 << "\" text-anchor=\"middle\">" << num(xv)
      << "</text>\n";
    s << "<text x=\"" << f.left - 6 << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
      << num(log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
  }
  s << "<text x=\"" << f.w / 2 << "\" y=\"" << f.h - 10 << "\" text-anchor=\"middle\">" << escape(ax.x_label)
    << "</text>\n"
    << "<text transform=\"translate(16," << f.h / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ax.y_label)
    << "</text>\n";
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

} // namespace detail

inline std::string line_svg(const std::vector<Series>& series, const Axes& ax) {
  detail::Frame f{};
  f.w = ax.width;
  f.h = ax.height;
  f.x0 = f.y0 = std::numeric_limits<double>::infinity();
  f.x1 = f.y1 = -std::numeric_limits<double>::infinity();
  auto yv = [&](double y) { return ax.log_y ? std::log10(y) : y; };
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw FormatError("plot series '" + s.label + "' has mismatched x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = yv(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  }
  if (!std::isfinite(f.x0)) f.x0 = 0, f.x1 = 1, f.y0 = 0, f.y1 = 1;
  detail::pad_range(f.x0, f.x1);
  detail::pad_range(f.y0, f.y1);

  std::ostringstream s;
  detail::frame_svg(s, f, ax, ax.log_y);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    // Thin dense traces to at most ~4 points per pixel column.
    const auto& sr = series[k];
    const std::size_t stride = std::max<std::size_t>(1, sr.x.size() / (4 * static_cast<std::size_t>(f.w)));
    for (std::size_t i = 0; i < sr.x.size(); i += stride) {
      const double y = yv(sr.y[i]);
      if (std::isfinite(y)) s << detail::num(f.px(sr.x[i])) << ',' << detail::num(f.py(y)) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << f.left + 10 << "\" y=\"" << f.top + 16 * (k + 1) << "\" fill=\"" << color << "\">"
      << detail::escape(sr.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct Histogram {
  double lo = 0.0, width = 1.0;
  std::vector<std::size_t> counts;
};

inline Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram: bins must be >= 1");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) return h;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  h.lo = *mn;
  h.width = *mx > *mn ? (*mx - *mn) / static_cast<double>(bins) : 1.0;
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - h.lo) / h.width);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

inline std::string histogram_svg(const Histogram& h, const Axes& ax) {
  detail::Frame f{};
  f.w = ax.width;
  f.h = ax.height;
  f.x0 = h.lo;
  f.x1 = h.lo + h.width * static_cast<double>(h.counts.size());
  f.y0 = 0.0;
  f.y1 = 1.0;
  for (auto c : h.counts) f.y1 = std::max(f.y1, static_cast<double>(c));
  detail::pad_range(f.x0, f.x1);

  std::ostringstream s;
  detail::frame_svg(s, f, ax, false);
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double xa = f.px(h.lo + h.width * static_cast<double>(b));
    const double xb = f.px(h.lo + h.width * static_cast<double>(b + 1));
    const double yt = f.py(static_cast<double>(h.counts[b]));
    s << "<rect x=\"" << detail::num(xa) << "\" y=\"" << detail::num(yt) << "\" width=\""
      << detail::num(std::max(0.0, xb - xa - 1)) << "\" height=\"" << detail::num(f.py(0) - yt)
      << "\" fill=\"#1f77b4\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_line_svg(const std::string& path, const std::vector<Series>& series, const Axes& ax) {
  detail::write_text(path, line_svg(series, ax));
}

inline void write_histogram_svg(const std::string& path, const Histogram& h, const Axes& ax) {
  detail::write_text(path, histogram_svg(h, ax));
}

} // namespace posture::plot
