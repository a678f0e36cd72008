#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "gmclab/special.hpp"

namespace gmclab::svg {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// Shortest text that parses back to the same double.
inline std::string exact(double x) {
  char buf[32];
  for (int digits = 6; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Fixed-size canvas with a rectangular plot area and linear data-to-pixel maps.
class Figure {
 public:
  Figure(double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (x1_ == x0_) x1_ = x0_ + 1.0;
    if (y1_ == y0_) y1_ = y0_ + 1.0;
  }

  double px(double x) const { return left + (x - x0_) / (x1_ - x0_) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0_) / (y1_ - y0_) * (height - top - bottom); }

  void axes(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    body_ << "<rect x='" << left << "' y='" << top << "' width='" << width - left - right << "' height='"
          << height - top - bottom << "' fill='none' stroke='black'/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double xv = x0_ + (x1_ - x0_) * k / 4.0, yv = y0_ + (y1_ - y0_) * k / 4.0;
      body_ << text(px(xv), height - bottom + 18, num(xv), "middle", 11);
      body_ << text(left - 6, py(yv) + 4, num(yv), "end", 11);
    }
    body_ << text(width / 2.0, 22, title, "middle", 15);
    body_ << text(width / 2.0, height - 12, xlabel, "middle", 13);
    body_ << "<text x='16' y='" << height / 2.0 << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 "
          << height / 2.0 << ")'>" << escape(ylabel) << "</text>\n";
  }

  void polyline(const std::vector<double>& x, const std::vector<double>& y, const std::string& colour) {
    body_ << "<polyline fill='none' stroke='" << colour << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < x.size(); ++i) body_ << num(px(x[i])) << ',' << num(py(y[i])) << ' ';
    body_ << "'/>\n";
  }

  void markers(const std::vector<double>& x, const std::vector<double>& y, const std::string& colour) {
    for (std::size_t i = 0; i < x.size(); ++i)
      body_ << "<circle cx='" << num(px(x[i])) << "' cy='" << num(py(y[i])) << "' r='4' fill='" << colour << "'/>\n";
  }

  void cell(double x, double y, double w, double h, const std::string& colour) {
    const double a = px(x), b = py(y + h);
    body_ << "<rect x='" << num(a) << "' y='" << num(b) << "' width='" << num(px(x + w) - a) << "' height='"
          << num(py(y) - b) << "' fill='" << colour << "'/>\n";
  }

  void note(const std::string& s, int line = 0) { body_ << text(left + 8, top + 18 + 16 * line, s, "start", 12); }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

  static constexpr double width = 640, height = 480, left = 64, right = 24, top = 36, bottom = 48;

 private:
  static std::string text(double x, double y, const std::string& s, const char* anchor, int size) {
    std::ostringstream o;
    o << "<text x='" << num(x) << "' y='" << num(y) << "' font-size='" << size << "' text-anchor='" << anchor
      << "'>" << escape(s) << "</text>\n";
    return o.str();
  }

  double x0_, x1_, y0_, y1_;
  std::ostringstream body_;
};

inline std::pair<double, double> range_of(const std::vector<double>& v, double pad = 0.05) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  return {*lo - pad * span, *hi + pad * span};
}

// Sequential white-to-red ramp for t in [0, 1].
inline std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[16];
  const int g = int(std::lround(255 * (1.0 - t)));
  const int r = int(std::lround(255 - 90 * t));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, g);
  return buf;
}

}  // namespace gmclab::svg
