#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "gmclab/error.hpp"
#include "gmclab/special.hpp"

namespace gmclab {

enum class RegionShape { disc, half_disc };

// disc: |z| < r.  half_disc: |z| < r and Im z > 1 - r.
struct Region {
  RegionShape shape = RegionShape::disc;
  double radius = 0.5;

  double floor() const { return shape == RegionShape::half_disc ? 1.0 - radius : -radius; }
  bool contains(cplx z) const { return std::abs(z) < radius && z.imag() > floor(); }
};

inline const char* shape_name(RegionShape s) { return s == RegionShape::disc ? "disc" : "half-disc"; }

inline RegionShape shape_from_name(const std::string& s) {
  if (s == "disc") return RegionShape::disc;
  if (s == "half-disc") return RegionShape::half_disc;
  throw Error(Errc::invalid_argument, "unknown region shape '" + s + "'");
}

namespace detail {

// area of {0 <= u <= x, 0 <= v <= y, u^2 + v^2 <= r^2} for x, y >= 0
inline double quadrant_area(double x, double y, double r) {
  x = std::min(x, r);
  y = std::min(y, r);
  if (x <= 0.0 || y <= 0.0) return 0.0;
  if (x * x + y * y <= r * r) return x * y;
  auto s = [r](double u) { return 0.5 * (u * std::sqrt(std::max(0.0, r * r - u * u)) + r * r * std::asin(std::min(1.0, u / r))); };
  const double ustar = std::sqrt(std::max(0.0, r * r - y * y));
  return y * ustar + s(x) - s(ustar);
}

inline double signed_quadrant(double x, double y, double r) {
  const double sx = x < 0 ? -1.0 : 1.0;
  const double sy = y < 0 ? -1.0 : 1.0;
  return sx * sy * quadrant_area(std::abs(x), std::abs(y), r);
}

}  // namespace detail

// Exact area of the rectangle [x0,x1] x [y0,y1] intersected with the region.
inline double clipped_area(const Region& reg, double x0, double x1, double y0, double y1) {
  y0 = std::max(y0, reg.floor());
  if (y1 <= y0 || x1 <= x0) return 0.0;
  const double r = reg.radius;
  using detail::signed_quadrant;
  return signed_quadrant(x1, y1, r) - signed_quadrant(x0, y1, r) - signed_quadrant(x1, y0, r) +
         signed_quadrant(x0, y0, r);
}

inline double region_area(const Region& reg) {
  const double r = reg.radius;
  return clipped_area(reg, -r, r, -r, r);
}

struct Grid {
  Region region;
  double spacing = 0.0;
  std::vector<cplx> points;   // cell centres
  std::vector<double> areas;  // clipped cell areas
};

// Square cells of side h on the lattice h Z^2; cells meeting the region are kept with clipped areas.
inline Grid make_grid(const Region& reg, double spacing) {
  if (!(spacing > 0.0)) throw Error(Errc::invalid_argument, "spacing must be positive");
  if (!(reg.radius > 0.0 && reg.radius <= 0.95)) throw Error(Errc::invalid_argument, "region radius must be in (0, 0.95]");
  Grid g{reg, spacing, {}, {}};
  const double r = reg.radius;
  const long kmax = static_cast<long>(std::ceil(r / spacing));
  const long jmin = static_cast<long>(std::floor(reg.floor() / spacing));
  for (long j = jmin; j < kmax; ++j)
    for (long i = -kmax; i < kmax; ++i) {
      const double x0 = i * spacing, y0 = j * spacing;
      const double a = clipped_area(reg, x0, x0 + spacing, y0, y0 + spacing);
      if (a > 1e-14 * spacing * spacing) {
        g.points.emplace_back(x0 + 0.5 * spacing, y0 + 0.5 * spacing);
        g.areas.push_back(a);
      }
    }
  return g;
}

}  // namespace gmclab
