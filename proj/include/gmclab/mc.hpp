#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gmclab/ensembles.hpp"
#include "gmclab/error.hpp"
#include "gmclab/mde.hpp"
#include "gmclab/parallel.hpp"
#include "gmclab/predict.hpp"
#include "gmclab/region.hpp"
#include "gmclab/spectral.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

// Draws with a pivot ratio below this count as numerically singular at eta = 0.
inline constexpr double singular_ratio = 1e-13;

struct MomentEstimate {
  KPointQuery query;
  int samples = 0;
  double log_mean = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
  double eta = 0.0;
  int rejected = 0;
  bool flagged = false;     // ess < 0.01 S
  bool unreliable = false;  // ess < 8
  std::vector<double> log_weights;  // per accepted draw, sample order
};

inline void check_query(const EnsembleSpec& spec, const KPointQuery& q) {
  if (q.points.size() != q.gammas.size() || q.points.empty())
    throw Error(Errc::invalid_argument, "points and gammas must be nonempty and of equal length");
  if (q.n != spec.n) throw Error(Errc::invalid_argument, "query n differs from ensemble n");
  for (const cplx& g : q.gammas)
    if (g.imag() != 0.0 || g.real() < 0.0)
      throw Error(Errc::domain, "Monte Carlo exponents must be real and nonnegative");
}

// Per-point centerings for eta > 0 (unused at eta = 0).
inline std::vector<MdeCenterings> kpoint_centerings(const KPointQuery& q, double eta) {
  std::vector<MdeCenterings> c;
  if (eta > 0.0)
    for (const cplx& z : q.points) c.push_back(centering_integral(z, eta));
  return c;
}

// sum_i gamma_i Phi_N(z_i, eta) for one draw; nullopt marks a rejected (singular) draw.
inline std::optional<double> kpoint_log_weight(const MatrixDraw& x, const KPointQuery& q, double eta,
                                               const std::vector<MdeCenterings>& centerings) {
  const double n = x.n();
  double acc = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) {
    const double g = q.gammas[i].real();
    const cplx z = q.points[i];
    double phi;
    if (eta == 0.0) {
      const LogDet ld = log_abs_det_shifted(x.entries, z);
      if (!(ld.min_ratio >= singular_ratio)) return std::nullopt;
      phi = ld.value - 0.5 * n * (std::norm(z) - 1.0);
    } else {
      phi = phi_n(hermitize_singular_values(x, z), eta, centerings[i]).value;
    }
    acc += g * phi;
  }
  return acc;
}

inline MomentEstimate summarize_kpoint(const KPointQuery& q, double eta, int samples,
                                       const std::vector<std::optional<double>>& per_draw) {
  MomentEstimate est;
  est.query = q;
  est.samples = samples;
  est.eta = eta;
  for (const auto& w : per_draw) {
    if (w)
      est.log_weights.push_back(*w);
    else
      ++est.rejected;
  }
  const LogMean lm = log_mean_exp(est.log_weights);
  est.log_mean = lm.log_mean;
  est.std_error = lm.std_error;
  est.ess = lm.ess;
  est.unreliable = lm.ess < 8.0;
  est.flagged = lm.ess < 0.01 * samples;
  return est;
}

// Plain Monte Carlo for E exp(sum_i gamma_i Phi_N(z_i, eta)); draw s uses stream (seed, first + s).
inline MomentEstimate estimate_kpoint(const EnsembleSpec& spec, const KPointQuery& q, double eta, int samples,
                                      std::uint64_t seed, int workers = 1, std::uint64_t first = 0) {
  check_query(spec, q);
  if (!(eta >= 0.0)) throw Error(Errc::domain, "eta must be >= 0");
  if (samples < 1) throw Error(Errc::invalid_argument, "samples must be >= 1");
  const auto cent = kpoint_centerings(q, eta);
  std::vector<std::optional<double>> per(samples);
  parallel_for(samples, workers, [&](std::size_t s) {
    const MatrixDraw x = sample_matrix(spec, {seed, first + s});
    per[s] = kpoint_log_weight(x, q, eta, cent);
  });
  return summarize_kpoint(q, eta, samples, per);
}

struct FieldScan {
  Grid grid;
  int n = 0;
  int draws = 0;
  std::vector<std::vector<double>> values;  // [draw][point]
};

// Field log|det(X - z)| + N(1 - |z|^2)_+/2 on the grid, from one eigen-decomposition per draw.
inline std::vector<double> field_on_grid(const MatrixDraw& x, const Grid& g) {
  const std::vector<cplx> eig = eigenvalues(x);
  std::vector<double> out(g.points.size());
  for (std::size_t j = 0; j < g.points.size(); ++j) {
    const cplx z = x.symmetry == Symmetry::real ? cplx(g.points[j].real(), std::abs(g.points[j].imag())) : g.points[j];
    const double v = field_from_eigenvalues(eig, z);
    out[j] = std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  }
  return out;
}

inline void check_region(const EnsembleSpec& spec, const Region& reg) {
  if (!(reg.radius > 0.0 && reg.radius <= 0.95)) throw Error(Errc::invalid_argument, "region radius must be in (0, 0.95]");
  if (spec.symmetry == Symmetry::real && reg.shape != RegionShape::half_disc)
    throw Error(Errc::invalid_argument, "real ensembles scan the half-disc region");
}

inline FieldScan scan_field(const EnsembleSpec& spec, const Region& reg, double spacing, int draws,
                            std::uint64_t seed, int workers = 1, std::uint64_t first = 0) {
  check_region(spec, reg);
  if (draws < 1) throw Error(Errc::invalid_argument, "draws must be >= 1");
  FieldScan scan{make_grid(reg, spacing), spec.n, draws, {}};
  scan.values.resize(draws);
  parallel_for(draws, workers, [&](std::size_t d) {
    scan.values[d] = field_on_grid(sample_matrix(spec, {seed, first + d}), scan.grid);
  });
  return scan;
}

struct DrawSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> per_draw;
};

inline DrawSummary summarize_draws(std::vector<double> v) {
  DrawSummary s;
  s.mean = mean_of(v);
  s.std_error = v.size() > 1 ? std::sqrt(variance_of(v) / double(v.size())) : 0.0;
  s.per_draw = std::move(v);
  return s;
}

// Lebesgue measure of {Phi_N >= nu log N} for one draw's field.
inline double exceedance_area(const Grid& g, const std::vector<double>& field, double threshold) {
  double a = 0.0;
  for (std::size_t j = 0; j < field.size(); ++j)
    if (field[j] >= threshold) a += g.areas[j];
  return a;
}

inline DrawSummary thick_points(const FieldScan& scan, double nu) {
  if (!(nu >= 0.0 && nu < 1.0 / std::sqrt(2.0))) throw Error(Errc::domain, "nu must lie in [0, 1/sqrt 2)");
  const double thr = nu * std::log(double(scan.n));
  std::vector<double> per;
  for (const auto& f : scan.values) per.push_back(exceedance_area(scan.grid, f, thr));
  return summarize_draws(std::move(per));
}

// log(N sum_j area_j e^{gamma Phi_j}) / (gamma log N)
inline double free_energy_of(const Grid& g, const std::vector<double>& field, double gamma, int n) {
  std::vector<double> terms(field.size());
  for (std::size_t j = 0; j < field.size(); ++j) terms[j] = gamma * field[j] + std::log(g.areas[j]);
  const double mx = *std::max_element(terms.begin(), terms.end());
  const double s = pairwise_sum(0, terms.size(), [&](std::size_t j) { return std::exp(terms[j] - mx); });
  const double logn = std::log(double(n));
  return (logn + mx + std::log(s)) / (gamma * logn);
}

inline DrawSummary free_energy(const FieldScan& scan, double gamma) {
  if (!(gamma > 0.0)) throw Error(Errc::domain, "gamma must be positive");
  std::vector<double> per;
  for (const auto& f : scan.values) per.push_back(free_energy_of(scan.grid, f, gamma, scan.n));
  return summarize_draws(std::move(per));
}

inline double freezing_limit(double gamma) {
  const double crit = 2.0 * std::sqrt(2.0);
  return gamma <= crit ? 1.0 / gamma + gamma / 8.0 : 1.0 / std::sqrt(2.0);
}

struct CltReport {
  std::vector<cplx> points;
  int draws = 0;
  int n = 0;
  double separation_exponent = 0.0;  // b with min |z_i - z_j| = N^{-1/2 + b}
  Eigen::MatrixXd sample_cov;
  Eigen::MatrixXd predicted_cov;
  std::vector<double> mean;
  std::vector<double> skewness;
  std::vector<double> excess_kurtosis;
  std::vector<std::vector<double>> log_det;  // [point][draw], raw log|det(X - z_i)|
};

inline double clt_predicted_cov(cplx zi, cplx zj, int n) {
  const double nn = n;
  return -0.25 * std::log(std::norm(zi - zj) + 1.0 / nn) / std::log(nn);
}

// Summary of raw log|det(X - z_i)| values, indexed [point][draw].
// Psi_N(z) = (log|det(X - z)| - N(|z|^2 - 1)/2) / sqrt(log N)
inline CltReport clt_summarize(const std::vector<cplx>& points, int n_dim, std::vector<std::vector<double>> log_det) {
  const std::size_t k = points.size();
  const double n = n_dim;
  const double logn = std::log(n);
  CltReport rep;
  rep.points = points;
  rep.draws = log_det.empty() ? 0 : int(log_det[0].size());
  rep.n = n_dim;
  rep.log_det = std::move(log_det);
  std::vector<std::vector<double>> psi(k, std::vector<double>(rep.draws));
  for (std::size_t i = 0; i < k; ++i)
    for (int d = 0; d < rep.draws; ++d)
      psi[i][d] = (rep.log_det[i][d] - 0.5 * n * (std::norm(points[i]) - 1.0)) / std::sqrt(logn);
  rep.sample_cov.resize(k, k);
  rep.predicted_cov.resize(k, k);
  double minsep = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    rep.mean.push_back(mean_of(psi[i]));
    rep.skewness.push_back(skewness_of(psi[i]));
    rep.excess_kurtosis.push_back(excess_kurtosis_of(psi[i]));
    for (std::size_t j = 0; j < k; ++j) {
      rep.sample_cov(i, j) = covariance_of(psi[i], psi[j]);
      rep.predicted_cov(i, j) = clt_predicted_cov(points[i], points[j], n_dim);
      if (i != j) minsep = std::min(minsep, std::abs(points[i] - points[j]));
    }
  }
  rep.separation_exponent = std::isfinite(minsep) ? std::log(minsep) / logn + 0.5 : 0.5;
  return rep;
}

// log|det(X - z_i)| for one draw.
inline std::vector<double> clt_draw(const EnsembleSpec& spec, const std::vector<cplx>& points, StreamId seed) {
  const MatrixDraw x = sample_matrix(spec, seed);
  std::vector<double> out;
  for (const cplx& z : points) out.push_back(log_abs_det_shifted(x.entries, z).value);
  return out;
}

inline CltReport clt_test(const EnsembleSpec& spec, const std::vector<cplx>& points, int draws, std::uint64_t seed,
                          int workers = 1, std::uint64_t first = 0) {
  if (draws < 32) throw Error(Errc::invalid_argument, "clt_test needs at least 32 draws");
  if (points.empty()) throw Error(Errc::invalid_argument, "clt_test needs points");
  std::vector<std::vector<double>> log_det(points.size(), std::vector<double>(draws));
  parallel_for(draws, workers, [&](std::size_t d) {
    const auto v = clt_draw(spec, points, {seed, first + d});
    for (std::size_t i = 0; i < points.size(); ++i) log_det[i][d] = v[i];
  });
  return clt_summarize(points, spec.n, std::move(log_det));
}

}  // namespace gmclab
