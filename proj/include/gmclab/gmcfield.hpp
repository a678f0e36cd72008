#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "gmclab/backend.hpp"
#include "gmclab/ensembles.hpp"
#include "gmclab/error.hpp"
#include "gmclab/parallel.hpp"
#include "gmclab/predict.hpp"
#include "gmclab/region.hpp"
#include "gmclab/rng.hpp"

namespace gmclab {

struct FieldGrid {
  Region region;
  double spacing = 0.0;
  std::vector<cplx> points;
  std::vector<double> areas;  // clipped cell areas
  double epsilon = 0.0;
  Symmetry symmetry = Symmetry::complex;
  double kappa4 = 0.0;
};

inline void validate_field_params(double epsilon, Symmetry sym, double kappa4) {
  const double e2 = epsilon * epsilon;
  if (!(e2 >= 1e-6 && e2 <= 1e-1)) throw Error(Errc::invalid_argument, "epsilon^2 must lie in [1e-6, 1e-1]");
  if (kappa4 < -4.0 / beta_of(sym)) throw Error(Errc::domain, "kappa4 below -4/beta gives an indefinite kernel");
}

// Spacing defaults to epsilon / 2; larger spacings are rejected.
inline FieldGrid make_field_grid(const Region& reg, double epsilon, Symmetry sym, double kappa4, double spacing = 0.0) {
  validate_field_params(epsilon, sym, kappa4);
  if (spacing == 0.0) spacing = 0.5 * epsilon;
  if (!(spacing > 0.0 && spacing <= 0.5 * epsilon * (1.0 + 1e-12)))
    throw Error(Errc::invalid_argument, "grid spacing must not exceed epsilon / 2");
  if (sym == Symmetry::real && reg.shape != RegionShape::half_disc)
    throw Error(Errc::invalid_argument, "real-class fields live on the half-disc region");
  const Grid g = make_grid(reg, spacing);
  return {reg, spacing, g.points, g.areas, epsilon, sym, kappa4};
}

// Explicit point set, for kernels evaluated off a lattice.
inline FieldGrid make_field_points(std::vector<cplx> points, std::vector<double> areas, double epsilon, Symmetry sym,
                                   double kappa4) {
  validate_field_params(epsilon, sym, kappa4);
  if (points.size() != areas.size() || points.empty()) throw Error(Errc::invalid_argument, "points and areas must match");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (sym == Symmetry::real && !(points[i].imag() > 0.0))
      throw Error(Errc::real_axis, "real-class points must lie above the real axis");
    for (std::size_t j = 0; j < i; ++j)
      if (points[i] == points[j]) throw Error(Errc::coincident_points, "grid points must be distinct");
  }
  FieldGrid g;
  g.points = std::move(points);
  g.areas = std::move(areas);
  g.epsilon = epsilon;
  g.symmetry = sym;
  g.kappa4 = kappa4;
  return g;
}

struct CovarianceFactor {
  FieldGrid grid;
  Eigen::MatrixXd cov;       // 2 C(z_j, eps^2, z_k, eps^2)
  Eigen::MatrixXd root;      // symmetric square root of the clipped matrix
  Eigen::VectorXd variance;  // diagonal of the clipped matrix
  double clip_mass = 0.0;    // sum of discarded negative eigenvalues, in absolute value
  double trace = 0.0;
  double min_eigenvalue = 0.0;
};

inline Eigen::MatrixXd covariance_matrix(const FieldGrid& g) {
  const std::size_t n = g.points.size();
  const double eta = g.epsilon * g.epsilon;
  std::vector<detail::AxisPoint> ax(n);
  for (std::size_t i = 0; i < n; ++i) ax[i] = detail::axis_point(g.points[i], eta);
  Eigen::MatrixXd c(n, n);
  const bool real = g.symmetry == Symmetry::real;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const cplx zi = g.points[i], zj = g.points[j];
      double v = detail::cov_v_forms(zi, ax[i], zj, ax[j]).alternate;
      if (real) v += detail::cov_v_forms(zi, ax[i], std::conj(zj), ax[j]).alternate;
      v += 0.25 * g.kappa4 * ax[i].y * ax[i].y * ax[j].y * ax[j].y;
      c(i, j) = c(j, i) = 2.0 * v;
    }
  return c;
}

inline CovarianceFactor regularized_covariance(const FieldGrid& g) {
  check_backend();
  CovarianceFactor f;
  f.grid = g;
  f.cov = covariance_matrix(g);
  const int n = int(f.cov.rows());
  Eigen::MatrixXd vec = f.cov;
  Eigen::VectorXd val(n);
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, vec.data(), n, val.data()) != 0)
    throw Error(Errc::backend, "dsyevd failed");
  f.trace = f.cov.trace();
  f.min_eigenvalue = val.minCoeff();
  Eigen::VectorXd root_val(n);
  for (int i = 0; i < n; ++i) {
    if (val[i] < 0.0) f.clip_mass -= val[i];
    root_val[i] = std::sqrt(std::max(0.0, val[i]));
  }
  if (f.clip_mass > 1e-6 * f.trace) throw Error(Errc::clip_mass, "negative spectrum too large for the grid");
  f.root = vec * root_val.asDiagonal() * vec.transpose();
  f.variance = (f.root * f.root).diagonal();
  return f;
}

inline Eigen::VectorXd standard_normals(int n, StreamId seed) {
  Philox rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

inline Eigen::VectorXd sample_field(const CovarianceFactor& f, StreamId seed) {
  return f.root * standard_normals(int(f.root.rows()), seed);
}

// Draws d = 0..count-1 from streams (seed, first + d), one column each.
inline Eigen::MatrixXd sample_fields(const CovarianceFactor& f, int count, std::uint64_t seed, std::uint64_t first = 0) {
  const int n = int(f.root.rows());
  Eigen::MatrixXd z(n, count);
  for (int d = 0; d < count; ++d) z.col(d) = standard_normals(n, {seed, first + std::uint64_t(d)});
  return f.root * z;
}

struct GmcSample {
  std::vector<double> field;
  std::vector<double> masses;
  double gamma = 0.0;
  double total = 0.0;
  bool supercritical = false;
};

inline GmcSample chaos_measure(const CovarianceFactor& f, const Eigen::VectorXd& field, double gamma) {
  if (!(gamma >= 0.0)) throw Error(Errc::domain, "gamma must be nonnegative");
  GmcSample s;
  s.gamma = gamma;
  s.supercritical = gamma >= 2.0 * std::sqrt(2.0);
  const auto& areas = f.grid.areas;
  s.field.assign(field.data(), field.data() + field.size());
  s.masses.resize(areas.size());
  for (std::size_t j = 0; j < areas.size(); ++j) {
    s.masses[j] = gamma == 0.0 ? areas[j] : std::exp(gamma * field[j] - 0.5 * gamma * gamma * f.variance[j]) * areas[j];
    s.total += s.masses[j];
  }
  return s;
}

inline std::vector<double> total_masses(const CovarianceFactor& f, double gamma, int draws, std::uint64_t seed,
                                        int workers = 1, std::uint64_t first = 0) {
  std::vector<double> out(draws);
  parallel_for(draws, workers, [&](std::size_t d) {
    out[d] = chaos_measure(f, sample_field(f, {seed, first + d}), gamma).total;
  });
  return out;
}

// Distance from z to the boundary of the region.
inline double boundary_distance(const Region& reg, cplx z) {
  double d = reg.radius - std::abs(z);
  if (reg.shape == RegionShape::half_disc) d = std::min(d, z.imag() - reg.floor());
  return d;
}

inline double boundary_mass(const FieldGrid& g, const GmcSample& s, double delta) {
  double m = 0.0;
  for (std::size_t j = 0; j < g.points.size(); ++j)
    if (boundary_distance(g.region, g.points[j]) < delta) m += s.masses[j];
  return m;
}

}  // namespace gmclab
