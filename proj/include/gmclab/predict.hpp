#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "gmclab/ensembles.hpp"
#include "gmclab/error.hpp"
#include "gmclab/mde.hpp"
#include "gmclab/special.hpp"

namespace gmclab {

struct PairParams {
  cplx z1, z2;
  double eta1 = 0.0, eta2 = 0.0;
  Symmetry symmetry = Symmetry::complex;
  double kappa4 = 0.0;
};

// Neumaier-compensated sum.
inline double compensated_sum(std::initializer_list<double> xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

struct CovForms {
  double main;      // 1 + (u1u2|z1||z2|)^2 - (m1m2)^2 - 2u1u2 Re(z1 conj z2) form
  double alternate; // u1u2|z1-z2|^2 + ... form
};

namespace detail {
struct AxisPoint {
  double y;  // m = i y
  double u;
};
inline AxisPoint axis_point(cplx z, double eta) {
  const MdeSolution s = solve_mde(z, cplx(0.0, eta));
  return {s.m.imag(), s.u.real()};
}
}  // namespace detail

namespace detail {
inline CovForms cov_v_forms(cplx z1, AxisPoint p1, cplx z2, AxisPoint p2) {
  const double uu = p1.u * p2.u;
  const double yy = p1.y * p2.y;
  const double main_arg = compensated_sum(
      {1.0, std::pow(uu * std::abs(z1) * std::abs(z2), 2), -yy * yy, -2.0 * uu * (z1 * std::conj(z2)).real()});
  const double alt_arg = compensated_sum({uu * std::norm(z1 - z2), p1.y * p1.y * (p2.u / p1.u) * (1.0 - p1.u),
                                          p2.y * p2.y * (p1.u / p2.u) * (1.0 - p2.u),
                                          (1.0 - p1.u) * (1.0 - p2.u)});
  if (!(alt_arg > 0.0)) throw Error(Errc::log_domain, "nonpositive argument in V");
  return {main_arg > 0.0 ? -0.25 * std::log(main_arg) : std::numeric_limits<double>::quiet_NaN(),
          -0.25 * std::log(alt_arg)};
}
}  // namespace detail

// Both closed forms of the covariance functional V(z1, eta1, z2, eta2).
inline CovForms cov_v_forms(cplx z1, double eta1, cplx z2, double eta2) {
  if (z1 == z2 && eta1 == 0.0 && eta2 == 0.0)
    throw Error(Errc::coincident_singular, "V is singular at coincident points with eta = 0");
  return detail::cov_v_forms(z1, detail::axis_point(z1, eta1), z2, detail::axis_point(z2, eta2));
}

inline double cov_v(cplx z1, double eta1, cplx z2, double eta2) {
  return cov_v_forms(z1, eta1, z2, eta2).alternate;
}

inline double cov_v(const PairParams& p) { return cov_v(p.z1, p.eta1, p.z2, p.eta2); }

inline double cov_c(const PairParams& p) {
  double v = cov_v(p.z1, p.eta1, p.z2, p.eta2);
  if (p.symmetry == Symmetry::real) v += cov_v(p.z1, p.eta1, std::conj(p.z2), p.eta2);
  const double y1 = detail::axis_point(p.z1, p.eta1).y;
  const double y2 = detail::axis_point(p.z2, p.eta2).y;
  // (m1 m2)^2 = (i y1 i y2)^2
  return v + 0.25 * p.kappa4 * y1 * y1 * y2 * y2;
}

inline double expectation_correction(cplx z, double eta, Symmetry sym, double kappa4) {
  const auto p = detail::axis_point(z, eta);
  double out = -0.25 * kappa4 * std::pow(p.y, 4);
  if (sym == Symmetry::real) {
    const double u = p.u;
    const double arg = compensated_sum({1.0, -u * u, 2.0 * u * u * u * std::norm(z), -2.0 * u * u * (z * z).real()});
    if (!(arg > 0.0)) throw Error(Errc::log_domain, "nonpositive argument in the real-case correction");
    out -= 0.25 * std::log(arg);
  }
  return out;
}

inline double kernel_k(cplx z, cplx w, Symmetry sym, double kappa4) {
  if (std::abs(z) >= 1.0 || std::abs(w) >= 1.0) return 0.0;
  if (z == w) throw Error(Errc::singular_pair, "kernel is singular on the diagonal");
  double k = -0.5 * std::log(std::abs(z - w));
  if (sym == Symmetry::real) {
    if (z == std::conj(w)) throw Error(Errc::singular_pair, "kernel is singular at conjugate pairs");
    k -= 0.5 * std::log(std::abs(z - std::conj(w)));
  }
  return k + 0.25 * kappa4 * ((1.0 - std::norm(z)) * (1.0 - std::norm(w)));
}

struct KPointQuery {
  int n = 0;
  std::vector<cplx> points;
  std::vector<cplx> gammas;
  Symmetry symmetry = Symmetry::complex;
  double kappa4 = 0.0;
};

struct PredictionParts {
  std::vector<cplx> leading;     // gamma N (|z|^2 - 1)/2
  std::vector<cplx> kappa;       // -(2 gamma - gamma^2) kappa4 (|z|^2 - 1)^2 / 8
  std::vector<cplx> n_power;     // gamma^2/8 ln N
  std::vector<cplx> barnes;      // ln((2 pi)^{gamma/4} / G(1 + gamma/2))
  std::vector<cplx> pair_kappa;  // j < k, row-major
  std::vector<cplx> pair_distance;
  cplx real_correction = 0.0;    // real-case E term
};

struct ValidityFlags {
  double min_separation_sqrt_n = std::numeric_limits<double>::infinity();
  double min_axis_distance_sqrt_n = std::numeric_limits<double>::infinity();
  double max_gamma = 0.0;
  std::vector<int> reflected;
};

struct Prediction {
  cplx log_value = 0.0;
  PredictionParts parts;
  ValidityFlags flags;
  std::vector<cplx> points;  // after reflection into the upper half plane (real case)
};

inline cplx sum_parts(const PredictionParts& p) {
  cplx s = p.real_correction;
  for (const auto* v : {&p.leading, &p.kappa, &p.n_power, &p.barnes, &p.pair_kappa, &p.pair_distance})
    for (const cplx& x : *v) s += x;
  return s;
}

inline Prediction kpoint_predict(const KPointQuery& q) {
  const std::size_t k = q.points.size();
  if (k == 0 || q.gammas.size() != k) throw Error(Errc::invalid_argument, "points and gammas must be nonempty and of equal length");
  if (q.n < 1) throw Error(Errc::invalid_argument, "n must be >= 1");
  Prediction pr;
  pr.points = q.points;
  for (std::size_t i = 0; i < k; ++i) {
    if (q.symmetry == Symmetry::real) {
      if (pr.points[i].imag() == 0.0) throw Error(Errc::real_axis, "real-case points must lie off the real axis");
      if (pr.points[i].imag() < 0.0) {
        pr.points[i] = std::conj(pr.points[i]);
        pr.flags.reflected.push_back(int(i));
      }
    }
    if (!(q.gammas[i].real() > -2.0)) throw Error(Errc::domain, "Re gamma must exceed -2");
  }
  const double n = q.n;
  const double logn = std::log(n);
  const double sqn = std::sqrt(n);
  auto& parts = pr.parts;
  for (std::size_t i = 0; i < k; ++i) {
    const cplx g = q.gammas[i];
    const double r = std::norm(pr.points[i]) - 1.0;
    parts.leading.push_back(0.5 * g * n * r);
    parts.kappa.push_back(-(2.0 * g - g * g) * q.kappa4 * r * r / 8.0);
    parts.n_power.push_back(g * g / 8.0 * logn);
    parts.barnes.push_back(g == cplx(0.0) ? cplx(0.0) : -log_g_constant(g));
    pr.flags.max_gamma = std::max(pr.flags.max_gamma, g.real());
    if (q.symmetry == Symmetry::real)
      pr.flags.min_axis_distance_sqrt_n = std::min(pr.flags.min_axis_distance_sqrt_n, pr.points[i].imag() * sqn);
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const double d = std::abs(pr.points[i] - pr.points[j]);
      if (d == 0.0) throw Error(Errc::coincident_points, "query points must be distinct");
      pr.flags.min_separation_sqrt_n = std::min(pr.flags.min_separation_sqrt_n, d * sqn);
      const cplx gg = q.gammas[i] * q.gammas[j];
      const double ri = std::norm(pr.points[i]) - 1.0;
      const double rj = std::norm(pr.points[j]) - 1.0;
      parts.pair_kappa.push_back(q.kappa4 * gg * ri * rj / 4.0);
      parts.pair_distance.push_back(-0.5 * gg * std::log(d));
    }
  if (q.symmetry == Symmetry::real) {
    cplx e = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j)
        e -= q.gammas[i] * q.gammas[j] / 8.0 * std::log(std::norm(pr.points[i] - std::conj(pr.points[j])));
      e -= q.gammas[i] / 4.0 * std::log(std::norm(pr.points[i] - std::conj(pr.points[i])));
    }
    parts.real_correction = e;
  }
  pr.log_value = sum_parts(parts);
  return pr;
}

// ln D(z, lambda) = sum lambda_i^2/8 ln N + sum_{i != j} lambda_i lambda_j / 8 [log |z_i - z_j|^{-2}]_+
inline double bound_envelope(const KPointQuery& q) {
  const std::size_t k = q.points.size();
  const double logn = std::log(double(q.n));
  double out = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double li = q.gammas[i].real();
    if (li < 0.0) throw Error(Errc::domain, "bound envelope needs lambda_i >= 0");
    out += li * li / 8.0 * logn;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double lj = q.gammas[j].real();
      out += li * lj / 8.0 * std::max(0.0, -2.0 * std::log(std::abs(q.points[i] - q.points[j])));
    }
  }
  return out;
}

}  // namespace gmclab
