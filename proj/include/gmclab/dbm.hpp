#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gmclab/ensembles.hpp"
#include "gmclab/error.hpp"
#include "gmclab/mde.hpp"
#include "gmclab/parallel.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/spectral.hpp"
#include "gmclab/special.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

struct DbmConfig {
  int n = 128;
  double omega1 = 0.2;
  double t1 = 0.0;        // N^{omega1 - 1}
  double eta_star = 0.0;  // (log N)^{c_star} / N
  double eta_m = 0.0;     // N^{-1 - delta_m}
  double ell1 = 0.0;      // N^{q1}
  double b_frak = 0.7;
  int steps = 400;
  double a1 = 1e3;
  double far_factor = 4.0;  // indices above far_factor * ell1 are frozen; <= 0 disables
  int refresh = 16;
  double noise_scale = 1.0;  // 0 gives the deterministic repulsion flow
  int max_halvings = 40;
};

struct DbmKnobs {
  double q1 = 0.55;
  double b_frak = 0.7;
  double delta_m = 1.0;
  double c_star = 0.5;
  int steps = 400;
};

inline int count_below(double bound) { return std::max(0, static_cast<int>(std::ceil(bound)) - 1); }

inline void validate_dbm(const DbmConfig& c) {
  const double inv_n = 1.0 / c.n;
  if (c.n < 4) throw Error(Errc::invalid_argument, "dbm needs n >= 4");
  if (!(c.eta_m < inv_n && inv_n < c.eta_star && c.eta_star < c.t1 && c.t1 < 1.0))
    throw Error(Errc::invalid_argument, "dbm scales must satisfy eta_m < 1/N < eta_star < t1 < 1");
  if (!(c.ell1 >= 2.0 && c.ell1 < c.n)) throw Error(Errc::invalid_argument, "ell1 must lie in [2, n)");
  if (!(std::pow(double(c.n), c.b_frak) < c.n)) throw Error(Errc::invalid_argument, "N^b must be below n");
  if (c.steps < 1) throw Error(Errc::invalid_argument, "steps must be >= 1");
}

inline DbmConfig make_dbm_config(int n, double omega1, const DbmKnobs& k = {}) {
  const double nn = n;
  DbmConfig c;
  c.n = n;
  c.omega1 = omega1;
  c.t1 = std::pow(nn, omega1 - 1.0);
  c.eta_star = std::pow(std::log(nn), k.c_star) / nn;
  c.eta_m = std::pow(nn, -1.0 - k.delta_m);
  c.ell1 = std::pow(nn, k.q1);
  c.b_frak = k.b_frak;
  c.steps = k.steps;
  validate_dbm(c);
  return c;
}

// Exact law of the matrix flow dX = dB/sqrt(N) at time t.
inline MatrixDraw evolve_matrix(const MatrixDraw& x0, double t, StreamId seed) {
  if (!(t >= 0.0)) throw Error(Errc::domain, "t must be >= 0");
  MatrixDraw out = x0;
  if (t == 0.0) return out;
  const MatrixDraw g = sample_ginibre(x0.n(), x0.symmetry, seed);
  out.entries += std::sqrt(t) * g.entries;
  out.seed = seed;
  return out;
}

struct DbmPath {
  std::vector<double> times;
  int kept = 0;                          // leading indices stored per time
  std::vector<std::vector<double>> mu;   // [time][i < kept]
  std::vector<double> terminal;          // all N values at t1
  int noise_count = 0;                   // indices i < ell1
  std::vector<std::vector<double>> noise;  // [step][i < noise_count], increments over the base step
  int halvings = 0;
};

namespace detail {

class FoldedDbm {
 public:
  FoldedDbm(const DbmConfig& c, std::vector<double> mu0, Philox& rng)
      : c_(c), mu_(std::move(mu0)), rng_(rng) {
    const int n = c.n;
    active_ = n;
    if (c.far_factor > 0.0) active_ = std::min(n, static_cast<int>(std::floor(c.far_factor * c.ell1)));
    base_ = mu_;
    far_.assign(active_, 0.0);
  }

  const std::vector<double>& state() const { return mu_; }
  int halvings() const { return halvings_; }

  // Frozen indices follow the deterministic rescaling of their start values.
  void move_frozen(double t) {
    const double scale = flow_scale(t);
    for (int j = active_; j < c_.n; ++j) mu_[j] = scale * base_[j];
  }

  // Drift from frozen indices beyond the nearest one, held fixed between refreshes.
  void refresh_far() {
    if (active_ == c_.n) return;
    for (int i = 0; i < active_; ++i) {
      double s = 0.0;
      for (int j = active_ + 1; j < c_.n; ++j) s += 1.0 / (mu_[i] - mu_[j]) + 1.0 / (mu_[i] + mu_[j]);
      far_[i] = s;
    }
  }

  // One base step with increments dw over dt for the active indices.
  void advance(const std::vector<double>& dw, double dt) { step(mu_, dw, dt, 0); }

 private:
  double min_gap(const std::vector<double>& mu) const {
    double g = 2.0 * mu[0];
    const int top = std::min(active_ + 1, c_.n);
    for (int i = 0; i + 1 < top; ++i) g = std::min(g, mu[i + 1] - mu[i]);
    return g;
  }

  void drift(const std::vector<double>& mu, std::vector<double>& out) const {
    const double inv2n = 0.5 / c_.n;
    for (int i = 0; i < active_; ++i) {
      double s = 0.5 / mu[i] + far_[i];
      if (active_ < c_.n) s += 1.0 / (mu[i] - mu[active_]) + 1.0 / (mu[i] + mu[active_]);
      for (int j = 0; j < active_; ++j) {
        if (j == i) continue;
        s += 1.0 / (mu[i] - mu[j]) + 1.0 / (mu[i] + mu[j]);
      }
      out[i] = inv2n * s;
    }
  }

  bool ordered(const std::vector<double>& mu) const {
    if (!(mu[0] > 0.0)) return false;
    const int top = std::min(active_ + 1, c_.n);
    for (int i = 0; i + 1 < top; ++i)
      if (!(mu[i + 1] > mu[i])) return false;
    return true;
  }

  void step(std::vector<double>& mu, const std::vector<double>& dw, double dt, int depth) {
    const double noise_sd = std::sqrt(dt / (2.0 * c_.n));
    const bool can_split = depth < c_.max_halvings;
    if (!(can_split && min_gap(mu) < 4.0 * noise_sd * c_.noise_scale)) {
      std::vector<double> b(active_);
      drift(mu, b);
      std::vector<double> trial = mu;
      const double inv = c_.noise_scale / std::sqrt(2.0 * c_.n);
      for (int i = 0; i < active_; ++i) trial[i] += b[i] * dt + inv * dw[i];
      trial[0] = std::abs(trial[0]);  // crossing zero swaps mu_1 with its mirror -mu_1
      if (ordered(trial)) {
        mu.swap(trial);
        return;
      }
      if (!can_split) throw Error(Errc::step_collision, "adaptive halving exhausted");
    }
    ++halvings_;
    // Brownian bridge split of dw into two half-step increments
    std::vector<double> a(active_), b(active_);
    for (int i = 0; i < active_; ++i) {
      a[i] = 0.5 * dw[i] + std::sqrt(0.25 * dt) * normal_(rng_);
      b[i] = dw[i] - a[i];
    }
    step(mu, a, 0.5 * dt, depth + 1);
    step(mu, b, 0.5 * dt, depth + 1);
  }

  const DbmConfig& c_;
  std::vector<double> mu_;
  Philox& rng_;
  int active_ = 0;
  std::vector<double> base_;
  std::vector<double> far_;
  std::normal_distribution<double> normal_;
  int halvings_ = 0;
};

}  // namespace detail

inline int dbm_kept_indices(const DbmConfig& c) {
  return std::max(count_below(c.ell1), count_below(std::pow(double(c.n), c.b_frak)));
}

// Folded singular-value flow started from a complex Ginibre draw at z = 0, integrated to t1.
inline DbmPath reference_flow(const DbmConfig& c, StreamId seed) {
  validate_dbm(c);
  const MatrixDraw g = sample_ginibre(c.n, Symmetry::complex, seed);
  std::vector<double> mu0 = hermitize_singular_values(g, 0.0).sigma;
  Philox rng(substream(seed, 1));
  std::normal_distribution<double> normal;
  detail::FoldedDbm flow(c, mu0, rng);

  DbmPath path;
  path.kept = dbm_kept_indices(c);
  path.noise_count = count_below(c.ell1);
  const double dt = c.t1 / c.steps;
  auto record = [&](double t) {
    path.times.push_back(t);
    const auto& s = flow.state();
    path.mu.emplace_back(s.begin(), s.begin() + path.kept);
  };
  flow.refresh_far();
  record(0.0);
  std::vector<double> dw(c.n);
  const double sd = std::sqrt(dt);
  for (int k = 0; k < c.steps; ++k) {
    if (k > 0 && k % c.refresh == 0) flow.refresh_far();
    for (int i = 0; i < c.n; ++i) dw[i] = sd * normal(rng);
    std::vector<double> kept_noise(dw.begin(), dw.begin() + path.noise_count);
    if (c.noise_scale == 0.0) std::fill(kept_noise.begin(), kept_noise.end(), 0.0);
    path.noise.push_back(std::move(kept_noise));
    flow.advance(dw, dt);
    flow.move_frozen((k + 1) * dt);
    record((k + 1) * dt);
  }

  path.terminal = flow.state();
  path.halvings = flow.halvings();
  return path;
}

struct LocalVariables {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;
  bool l1_violation = false;  // l1 > (log N)^{3/4}
  bool l2_violation = false;  // |l2| > A1 log N
  bool l3_violation = false;  // |l3| > 1
  bool inside() const { return !(l1_violation || l2_violation || l3_violation); }
};

inline void set_windows(LocalVariables& lv, const DbmConfig& c) {
  const double logn = std::log(double(c.n));
  lv.l1_violation = lv.l1 > std::pow(logn, 0.75);
  lv.l2_violation = std::abs(lv.l2) > c.a1 * logn;
  lv.l3_violation = std::abs(lv.l3) > 1.0;
}

inline LocalVariables local_variables(const DbmPath& p, const DbmConfig& c) {
  const int nb = count_below(std::pow(double(c.n), c.b_frak));
  const int nl = count_below(c.ell1);
  if (int(p.noise.size()) + 1 != int(p.times.size()) || p.noise_count < nl)
    throw Error(Errc::missing_noise, "path lacks the retained increments");
  if (int(p.terminal.size()) < nb || p.kept < nl) throw Error(Errc::invalid_argument, "path lacks stored indices");
  const double n = c.n;
  const double rho0 = 1.0 / constants::pi;
  LocalVariables lv;

  // L1: deterministic double integral minus the terminal sum
  const double a = nb > 0 ? std::pow(n, c.b_frak) / (2.0 * n * rho0) : 0.0;
  auto prim = [a](double u) { return u * std::atan(a / u) + 0.5 * a * std::log(u * u + a * a); };
  double sum = 0.0;
  for (int i = 0; i < nb; ++i) {
    const double m2 = p.terminal[i] * p.terminal[i];
    sum += std::log((m2 + c.eta_star * c.eta_star) / (m2 + c.eta_m * c.eta_m));
  }
  lv.l1 = 2.0 * n * rho0 * (prim(c.eta_star) - prim(c.eta_m)) - 0.5 * sum;

  // L2: Ito sum with left-point integrand
  const double pref = 0.5 / std::sqrt(2.0 * n);
  double l2 = 0.0;
  for (std::size_t k = 0; k + 1 < p.times.size(); ++k) {
    const double nu = c.eta_star + c.t1 - p.times[k];
    for (int i = 0; i < nl; ++i) {
      const double m = p.mu[k][i];
      l2 += 2.0 * m / (m * m + nu * nu) * p.noise[k][i];
    }
  }
  lv.l2 = pref * l2;

  // L3: -(N/2) int_{t1/2}^{t1} R(s)^2 ds, trapezoid on the stored times
  const double al = c.ell1 / (2.0 * n * rho0);
  auto r_of = [&](std::size_t k) {
    const double nu = c.eta_star + c.t1 - p.times[k];
    double s = 0.0;
    for (int i = 0; i < nl; ++i) s += nu / (p.mu[k][i] * p.mu[k][i] + nu * nu);
    return s / n - 2.0 * rho0 * std::atan(al / nu);
  };
  double l3 = 0.0;
  const double half = 0.5 * c.t1;
  for (std::size_t k = 0; k + 1 < p.times.size(); ++k) {
    const double t0 = p.times[k], t1 = p.times[k + 1];
    if (t1 <= half) continue;
    const double lo = std::max(t0, half);
    double r0 = r_of(k);
    const double r1 = r_of(k + 1);
    if (lo > t0) r0 = r0 + (r1 - r0) * (lo - t0) / (t1 - t0);
    l3 += 0.5 * (r0 * r0 + r1 * r1) * (t1 - lo);
  }
  lv.l3 = -0.5 * n * l3;

  set_windows(lv, c);
  return lv;
}

inline double local_factor_prediction(const DbmConfig& c, double lambda) {
  return std::exp(lambda * lambda / 8.0 * std::log(2.0 * c.n * c.t1)) / g_constant(lambda).real();
}

struct LocalFactorResult {
  double estimate = 0.0;
  double std_error = 0.0;
  double prediction = 0.0;
  double ess = 0.0;
  double inside_fraction = 0.0;
  int l1_violations = 0, l2_violations = 0, l3_violations = 0;
  int halvings = 0;
  std::vector<LocalVariables> per_path;
};

inline LocalFactorResult summarize_local_factor(const DbmConfig& c, double lambda, std::vector<LocalVariables> lv,
                                                int halvings) {
  LocalFactorResult r;
  r.prediction = local_factor_prediction(c, lambda);
  std::vector<double> w;
  int inside = 0;
  for (const auto& v : lv) {
    r.l1_violations += v.l1_violation;
    r.l2_violations += v.l2_violation;
    r.l3_violations += v.l3_violation;
    inside += v.inside();
    w.push_back(v.inside() ? std::exp(lambda * (v.l1 + v.l2 + v.l3)) : 0.0);
  }
  const double n = double(w.size());
  r.estimate = mean_of(w);
  r.std_error = w.size() > 1 ? std::sqrt(variance_of(w) / n) : 0.0;
  double s1 = 0.0, s2 = 0.0;
  for (double x : w) {
    s1 += x;
    s2 += x * x;
  }
  r.ess = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
  r.inside_fraction = inside / n;
  r.halvings = halvings;
  r.per_path = std::move(lv);
  return r;
}

inline LocalFactorResult local_factor(const DbmConfig& c, double lambda, int paths, std::uint64_t seed,
                                      int workers = 1, std::uint64_t first = 0) {
  validate_dbm(c);
  if (!(lambda >= 0.0 && lambda <= 3.0)) throw Error(Errc::domain, "lambda must lie in [0, 3]");
  if (paths < 100) throw Error(Errc::invalid_argument, "paths must be >= 100");
  std::vector<LocalVariables> lv(paths);
  std::vector<int> halv(paths);
  parallel_for(paths, workers, [&](std::size_t p) {
    const DbmPath path = reference_flow(c, {seed, first + p});
    lv[p] = local_variables(path, c);
    halv[p] = path.halvings;
  });
  int h = 0;
  for (int x : halv) h += x;
  return summarize_local_factor(c, lambda, std::move(lv), h);
}

}  // namespace gmclab
