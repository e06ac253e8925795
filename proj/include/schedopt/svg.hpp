#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace schedopt::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  std::string label;
  bool dashed = false;
  double width = 1.5;
};

/// Blue (0) to dark red (1).
inline std::string ramp_color(double f) {
  f = std::clamp(f, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(30 + f * (160 - 30)));
  const int g = static_cast<int>(std::lround(90 * (1.0 - f) + 10 * f));
  const int b = static_cast<int>(std::lround(200 * (1.0 - f) + 20 * f));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

namespace detail {

constexpr double kWidth = 640, kHeight = 400, kLeft = 64, kRight = 20, kTop = 36, kBottom = 48;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
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
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void header(std::ostringstream& os, const std::string& title, const std::string& xlabel,
                   const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8 << "\" text-anchor=\"middle\">" << escape(xlabel)
     << "</text>\n"
     << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << kHeight / 2 << ")\">" << escape(ylabel) << "</text>\n";
}

inline void axes(std::ostringstream& os, const Frame& f) {
  os << "<g stroke=\"#444\" fill=\"none\">\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
     << f.py(f.y0) << "\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kLeft << "\" y2=\"" << kTop << "\"/>\n"
     << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << f.px(xv) << "\" y=\"" << f.py(f.y0) + 16 << "\" text-anchor=\"middle\">" << num(xv)
       << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
       << "</text>\n";
  }
}

}  // namespace detail

inline std::string line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  const detail::Frame f{x0, x1, y0 - pad, y1 + pad};
  std::ostringstream os;
  detail::header(os, title, xlabel, ylabel);
  detail::axes(os, f);
  int legend = 0;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width << "\""
       << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << detail::num(f.px(s.x[i])) << ',' << detail::num(f.py(s.y[i])) << ' ';
    }
    os << "\"/>\n";
    if (!s.label.empty()) {
      const double ly = detail::kTop + 14 * legend++;
      os << "<text x=\"" << detail::kWidth - detail::kRight - 4 << "\" y=\"" << ly + 10
         << "\" text-anchor=\"end\" fill=\"" << s.color << "\">" << detail::escape(s.label) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string bar_chart(const std::string& title, const std::string& ylabel, const std::vector<std::string>& labels,
                             const std::vector<double>& values) {
  double y1 = 0.0, y0 = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) y1 = std::max(y1, v), y0 = std::min(y0, v);
  }
  if (y1 == y0) y1 = y0 + 1;
  const double n = static_cast<double>(std::max<std::size_t>(values.size(), 1));
  const detail::Frame f{0.0, n, y0, y1 * 1.05};
  std::ostringstream os;
  detail::header(os, title, "", ylabel);
  os << "<line x1=\"" << detail::kLeft << "\" y1=\"" << f.py(0) << "\" x2=\"" << detail::kWidth - detail::kRight
     << "\" y2=\"" << f.py(0) << "\" stroke=\"#444\"/>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double xa = f.px(i + 0.15), xb = f.px(i + 0.85);
    const double ya = f.py(std::max(v, 0.0)), yb = f.py(std::min(v, 0.0));
    os << "<rect x=\"" << detail::num(xa) << "\" y=\"" << detail::num(ya) << "\" width=\"" << detail::num(xb - xa)
       << "\" height=\"" << detail::num(yb - ya) << "\" fill=\"" << ramp_color(i / std::max(1.0, n - 1)) << "\"/>\n";
    os << "<text x=\"" << detail::num(0.5 * (xa + xb)) << "\" y=\"" << f.py(0) + 16 << "\" text-anchor=\"middle\">"
       << detail::escape(i < labels.size() ? labels[i] : std::to_string(i)) << "</text>\n";
    os << "<text x=\"" << detail::num(0.5 * (xa + xb)) << "\" y=\"" << detail::num(ya - 4)
       << "\" text-anchor=\"middle\">" << detail::num(v) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes an SVG file; failures are swallowed because plots never decide the outcome of a run.
inline bool write_file(const std::filesystem::path& path, const std::string& content) noexcept {
  try {
    std::ofstream os(path);
    if (!os) return false;
    os << content;
    return static_cast<bool>(os);
  } catch (...) {
    return false;
  }
}

}  // namespace schedopt::svg
