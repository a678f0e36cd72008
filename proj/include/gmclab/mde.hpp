#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <vector>

#include "gmclab/error.hpp"
#include "gmclab/special.hpp"

namespace gmclab {

struct MdeSolution {
  cplx z;
  cplx w;
  cplx m;
  cplx u;
  double residual = 0.0;
};

inline double mde_residual(cplx z, cplx w, cplx m) {
  const double a = std::norm(z);
  return std::abs(-1.0 / m - (w + m - a / (w + m)));
}

namespace detail {

// Positive root y of y((eta+y)^2 + a) = eta + y, i.e. m = i y on the imaginary axis.
inline double imag_axis_root(double a, double eta) {
  double y = eta > 1.0 ? 1.0 / eta : 1.0;  // upper bound of the root
  // g is convex on y > 0 with g(0) < 0, so Newton from the right descends monotonically.
  for (int it = 0; it < 200; ++it) {
    const double s = eta + y;
    const double g = y * (s * s + a) - s;
    const double dg = s * s + a + 2.0 * y * s - 1.0;
    if (!(dg > 0.0)) break;
    const double step = g / dg;
    const double next = y - step;
    if (!(next < y) || next <= 0.0) break;
    y = next;
    if (step <= 4e-16 * y) break;
  }
  // one bisection-free polish step is enough once converged
  return y;
}

inline cplx cubic_value(cplx m, cplx w, double a) {
  return ((m + 2.0 * w) * m + (w * w - a + 1.0)) * m + w;
}

inline cplx cubic_derivative(cplx m, cplx w, double a) {
  return (3.0 * m + 4.0 * w) * m + (w * w - a + 1.0);
}

inline cplx polish_root(cplx m, cplx w, double a) {
  for (int it = 0; it < 8; ++it) {
    const cplx d = cubic_derivative(m, w, a);
    if (d == cplx(0.0)) break;
    const cplx step = cubic_value(m, w, a) / d;
    m -= step;
    if (std::abs(step) <= 1e-17 * std::abs(m)) break;
  }
  return m;
}

inline std::vector<cplx> cubic_roots(cplx w, double a) {
  Eigen::Matrix3cd comp = Eigen::Matrix3cd::Zero();
  comp(0, 0) = -2.0 * w;
  comp(0, 1) = -(w * w - a + 1.0);
  comp(0, 2) = -w;
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(comp, false);
  std::vector<cplx> roots;
  for (int i = 0; i < 3; ++i) roots.push_back(polish_root(es.eigenvalues()(i), w, a));
  return roots;
}

// Newton continuation in Im w from a large-|w| seed where m ~ -1/w.
inline cplx continuation_root(cplx w, double a) {
  const double target = w.imag();
  double eta = std::max(10.0, 2.0 * target);
  cplx m = -1.0 / cplx(w.real(), eta);
  while (true) {
    const cplx wk(w.real(), eta);
    for (int it = 0; it < 100; ++it) {
      const cplx step = cubic_value(m, wk, a) / cubic_derivative(m, wk, a);
      m -= step;
      if (std::abs(step) <= 1e-16 * std::abs(m)) break;
    }
    if (eta == target) break;
    eta = std::max(target, 0.8 * eta);
  }
  return m;
}

}  // namespace detail

inline MdeSolution solve_mde(cplx z, cplx w) {
  const double a = std::norm(z);
  MdeSolution sol{z, w, 0.0, 0.0, 0.0};
  if (w.real() == 0.0 && w.imag() >= 0.0) {
    const double eta = w.imag();
    if (eta == 0.0) {
      if (a < 1.0) {
        sol.m = cplx(0.0, std::sqrt(1.0 - a));
        sol.u = 1.0;
      } else {
        sol.m = 0.0;
        sol.u = 1.0 / a;
      }
      sol.residual = a < 1.0 ? mde_residual(z, w, sol.m) : 0.0;
      return sol;
    }
    const double y = detail::imag_axis_root(a, eta);
    sol.m = cplx(0.0, y);
    sol.u = y / (eta + y);
    sol.residual = mde_residual(z, w, sol.m);
    if (!(sol.residual < 1e-10))
      throw Error(Errc::no_convergence, "imaginary-axis solve did not converge");
    return sol;
  }
  if (!(w.imag() > 0.0)) throw Error(Errc::domain, "solve_mde needs Im w > 0 or w on the upper imaginary axis");

  std::vector<cplx> stable;
  for (const cplx& r : detail::cubic_roots(w, a))
    if (r.imag() > 0.0) stable.push_back(r);
  cplx m;
  if (stable.size() == 1) {
    m = stable.front();
  } else {
    m = detail::polish_root(detail::continuation_root(w, a), w, a);
  }
  if (!(m.imag() > 0.0)) throw Error(Errc::no_convergence, "no stable root found");
  sol.m = m;
  sol.u = m / (w + m);
  sol.residual = mde_residual(z, w, m);
  if (!(sol.residual < 1e-9)) throw Error(Errc::no_convergence, "off-axis solve did not converge");
  return sol;
}

inline MdeSolution solve_mde_imag(cplx z, double eta) { return solve_mde(z, cplx(0.0, eta)); }

// rho^z(x) from the real-coefficient cubic: Im of its complex-conjugate root pair, over pi.
inline double density_at(cplx z, double x) {
  const double a = std::norm(z);
  const double b = 2.0 * x;
  const double c = x * x - a + 1.0;
  const double d = x;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double h = 0.25 * q * q + p * p * p / 27.0;
  if (!(h > 0.0)) return 0.0;
  const double sh = std::sqrt(h);
  const double cc = std::cbrt(-0.5 * q + sh);
  const double dd = std::cbrt(-0.5 * q - sh);
  // C - D = (C^3 - D^3) / (C^2 + CD + D^2), avoids cancellation near the edge
  const double im = std::sqrt(3.0) * sh / (cc * cc + cc * dd + dd * dd);
  return im / constants::pi;
}

inline double support_edge(cplx z) {
  if (!(std::abs(z) <= 0.99)) throw Error(Errc::domain, "support_edge needs |z| <= 0.99");
  double lo = 0.0, hi = 4.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (density_at(z, mid) > 1e-10)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

struct DensityProfile {
  cplx z;
  double edge = 0.0;
  std::vector<double> x;
  std::vector<double> rho;
  std::vector<double> quantiles;
};

// integral of rho over [0, x] using x = edge - s^2, which removes the square-root edge.
inline double density_cdf(cplx z, double edge, double x) {
  using boost::math::quadrature::gauss_kronrod;
  x = std::clamp(x, 0.0, edge);
  if (x == 0.0) return 0.0;
  const double s_lo = std::sqrt(edge - x);
  const double s_hi = std::sqrt(edge);
  auto f = [&](double s) { return 2.0 * s * density_at(z, edge - s * s); };
  return gauss_kronrod<double, 31>::integrate(f, s_lo, s_hi, 15, 1e-12);
}

inline DensityProfile density(cplx z, int resolution) {
  if (resolution < 8) throw Error(Errc::invalid_argument, "resolution must be >= 8");
  if (!(std::abs(z) <= 0.99)) throw Error(Errc::domain, "density needs |z| <= 0.99");
  DensityProfile prof;
  prof.z = z;
  prof.edge = support_edge(z);
  prof.x.resize(resolution);
  prof.rho.resize(resolution);
  for (int k = 0; k < resolution; ++k) {
    const double x = prof.edge * k / (resolution - 1);
    prof.x[k] = x;
    prof.rho[k] = k == resolution - 1 ? 0.0 : density_at(z, x);
  }
  return prof;
}

// gamma_i solving integral_0^{gamma_i} rho = i/(2n), i = 1..n.
inline std::vector<double> quantiles(const DensityProfile& prof, int n) {
  using boost::math::quadrature::gauss_kronrod;
  if (n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  const cplx z = prof.z;
  const double edge = prof.edge;
  // cumulative table in s = sqrt(edge - x); F(x) = integral over s in [s(x), sqrt(edge)]
  auto g = [&](double s) { return 2.0 * s * density_at(z, edge - s * s); };
  const int cells = 512;
  const double s_max = std::sqrt(edge);
  std::vector<double> nodes(cells + 1), cum(cells + 1, 0.0);  // cum[k] = integral from nodes[k] to s_max
  for (int k = 0; k <= cells; ++k) nodes[k] = s_max * k / cells;
  for (int k = cells - 1; k >= 0; --k)
    cum[k] = cum[k + 1] + gauss_kronrod<double, 31>::integrate(g, nodes[k], nodes[k + 1], 0, 0.0);
  const double total = cum[0];
  auto cdf = [&](double x) {
    const double s = std::sqrt(std::max(edge - x, 0.0));
    const int k = std::min(cells - 1, int(s / s_max * cells));
    return cum[k + 1] + gauss_kronrod<double, 31>::integrate(g, s, nodes[k + 1], 0, 0.0);
  };

  const double rho0 = density_at(z, 0.0);
  std::vector<double> out(n);
  double prev = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double target = double(i) / (2.0 * n);
    if (target >= total) {
      out[i - 1] = edge;
      prev = edge;
      continue;
    }
    double lo = prev, hi = edge;
    double x = std::clamp(i == 1 ? target / rho0 : prev + 1.0 / (2.0 * n * std::max(density_at(z, prev), 1e-3)), lo, hi);
    for (int it = 0; it < 200; ++it) {
      const double f = cdf(x) - target;
      if (std::abs(f) < 1e-15) break;
      if (f > 0.0)
        hi = x;
      else
        lo = x;
      const double r = density_at(z, x);
      double next = r > 0.0 ? x - f / r : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo < 4e-16 * hi) break;
      x = next;
    }
    out[i - 1] = x;
    prev = x;
  }
  return out;
}

struct MdeCenterings {
  cplx z;
  double eta = 0.0;
  double t = 0.0;
  double integral = 0.0;
};

// integral of log(x^2 + eta^2) rho^z(x) dx over the whole support.
inline MdeCenterings centering_integral(cplx z, double eta) {
  using boost::math::quadrature::gauss_kronrod;
  if (!(eta >= 0.0)) throw Error(Errc::domain, "eta must be >= 0");
  if (!(std::abs(z) <= 0.99)) throw Error(Errc::domain, "centering needs |z| <= 0.99");
  const double edge = support_edge(z);
  const double rho0 = density_at(z, 0.0);
  const double x0 = 0.5 * edge;

  auto logterm = [eta](double x) { return std::log(x * x + eta * eta); };
  // primitive of log(x^2 + eta^2)
  auto prim = [eta](double x) {
    if (x == 0.0) return 0.0;
    if (eta == 0.0) return 2.0 * x * (std::log(x) - 1.0);
    return x * std::log(x * x + eta * eta) - 2.0 * x + 2.0 * eta * std::atan(x / eta);
  };

  auto inner = [&](double x) { return x == 0.0 && eta == 0.0 ? 0.0 : logterm(x) * (density_at(z, x) - rho0); };
  double near = 0.0;
  std::vector<double> cuts{0.0};
  // geometric breakpoints resolve both the eta scale and the fast variation near x = 0 as |z| -> 1
  for (double c = std::max(eta, 1e-6 * x0); c < x0; c *= 2.0) cuts.push_back(c);
  cuts.push_back(x0);
  double err = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double e = 0.0;
    near += gauss_kronrod<double, 31>::integrate(inner, cuts[k], cuts[k + 1], 3, 1e-12, &e);
    err += e;
  }
  near += rho0 * prim(x0);

  auto outer = [&](double s) {
    const double x = edge - s * s;
    return 2.0 * s * logterm(x) * density_at(z, x);
  };
  double e2 = 0.0;
  const double far = gauss_kronrod<double, 31>::integrate(outer, 0.0, std::sqrt(edge - x0), 8, 1e-13, &e2);
  err += e2;
  if (!std::isfinite(near + far) || err > 1e-8)
    throw Error(Errc::quadrature_failure, "centering quadrature did not meet tolerance");
  return {z, eta, 0.0, 2.0 * (near + far)};
}

inline double flow_scale(double t) { return std::sqrt(1.0 + t); }

// m_t^z(w) = m^{z/c}(w/c)/c with c = sqrt(1+t), evaluated on w = i eta.
inline MdeSolution time_rescaled_mde(cplx z, double eta, double t) {
  if (!(t >= 0.0)) throw Error(Errc::domain, "t must be >= 0");
  const double c = flow_scale(t);
  MdeSolution s = solve_mde(z / c, cplx(0.0, eta / c));
  const cplx w(0.0, eta);
  MdeSolution out{z, w, s.m / c, 0.0, 0.0};
  out.u = out.m / (w + out.m);
  out.residual = s.residual;
  return out;
}

// Centering of the time-t density rho_t^z(x) = rho^{z/c}(x/c)/c.
inline MdeCenterings centering_integral_t(cplx z, double eta, double t) {
  const double c = flow_scale(t);
  MdeCenterings base = centering_integral(z / c, eta / c);
  return {z, eta, t, 2.0 * std::log(c) + base.integral};
}

struct Characteristic {
  cplx z0;
  std::vector<double> t;
  std::vector<double> eta;
  double max_step_residual = 0.0;
};

// RK4 for d eta/dt = -Im m_t(i eta), integrated backward from (t_end, eta_end) to t = 0.
inline Characteristic characteristic_path(cplx z0, double eta_end, double t_end, int steps) {
  if (!(eta_end > 0.0) || !(t_end > 0.0)) throw Error(Errc::domain, "eta_end and t_end must be positive");
  if (steps < 1) throw Error(Errc::step_underflow, "steps must be >= 1");
  const double h = t_end / steps;
  if (!(h > 1e-300)) throw Error(Errc::step_underflow, "step size underflow");
  auto rate = [&](double t, double eta) { return time_rescaled_mde(z0, eta, t).m.imag(); };
  auto rk4 = [&](double t, double eta, double dt) {
    // backward in t: d eta/d(-t) = +Im m
    const double k1 = rate(t, eta);
    const double k2 = rate(t - 0.5 * dt, eta + 0.5 * dt * k1);
    const double k3 = rate(t - 0.5 * dt, eta + 0.5 * dt * k2);
    const double k4 = rate(t - dt, eta + dt * k3);
    return eta + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  Characteristic ch;
  ch.z0 = z0;
  std::vector<double> ts(steps + 1), es(steps + 1);
  ts[steps] = t_end;
  es[steps] = eta_end;
  for (int k = steps; k > 0; --k) {
    const double t = ts[k];
    const double full = rk4(t, es[k], h);
    const double half = rk4(t - 0.5 * h, rk4(t, es[k], 0.5 * h), 0.5 * h);
    ch.max_step_residual = std::max(ch.max_step_residual, std::abs(full - half));
    ts[k - 1] = t_end * (k - 1) / steps;
    es[k - 1] = half;
  }
  ch.t = std::move(ts);
  ch.eta = std::move(es);
  return ch;
}

}  // namespace gmclab
