#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace gmclab {

// Pairwise (tree) summation over a fixed ordering.
template <class F>
double pairwise_sum(std::size_t lo, std::size_t hi, const F& term) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(lo, mid, term) + pairwise_sum(mid, hi, term);
}

struct LogMean {
  double log_mean = 0.0;
  double std_error = 0.0;  // delta method, on the log scale
  double ess = 0.0;
  std::size_t count = 0;
};

// ln of the sample mean of exp(x_i), with delta-method error and effective sample size.
inline LogMean log_mean_exp(std::span<const double> x) {
  LogMean out;
  out.count = x.size();
  if (x.empty()) return out;
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) {
    out.log_mean = mx;
    return out;
  }
  const double n = static_cast<double>(x.size());
  const double s1 = pairwise_sum(0, x.size(), [&](std::size_t i) { return std::exp(x[i] - mx); });
  const double s2 = pairwise_sum(0, x.size(), [&](std::size_t i) { return std::exp(2.0 * (x[i] - mx)); });
  const double mean = s1 / n;
  out.log_mean = mx + std::log(mean);
  out.ess = s1 * s1 / s2;
  if (x.size() > 1) {
    const double var = std::max(0.0, (s2 / n - mean * mean) * n / (n - 1.0));
    out.std_error = std::sqrt(var / n) / mean;
  }
  return out;
}

inline double mean_of(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return pairwise_sum(0, x.size(), [&](std::size_t i) { return x[i]; }) / double(x.size());
}

inline double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  return pairwise_sum(0, x.size(), [&](std::size_t i) { return (x[i] - m) * (x[i] - m); }) / double(x.size() - 1);
}

inline double covariance_of(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2) return 0.0;
  const double mx = mean_of(x), my = mean_of(y);
  return pairwise_sum(0, x.size(), [&](std::size_t i) { return (x[i] - mx) * (y[i] - my); }) / double(x.size() - 1);
}

inline double skewness_of(std::span<const double> x) {
  const double m = mean_of(x);
  const double n = double(x.size());
  const double m2 = pairwise_sum(0, x.size(), [&](std::size_t i) { return std::pow(x[i] - m, 2); }) / n;
  const double m3 = pairwise_sum(0, x.size(), [&](std::size_t i) { return std::pow(x[i] - m, 3); }) / n;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

inline double excess_kurtosis_of(std::span<const double> x) {
  const double m = mean_of(x);
  const double n = double(x.size());
  const double m2 = pairwise_sum(0, x.size(), [&](std::size_t i) { return std::pow(x[i] - m, 2); }) / n;
  const double m4 = pairwise_sum(0, x.size(), [&](std::size_t i) { return std::pow(x[i] - m, 4); }) / n;
  return m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    f.slope_se = std::sqrt(rss / double(x.size() - 2) / sxx);
  }
  return f;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return d;
}

// One-sample statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> a, const std::function<double(double)>& cdf) {
  std::sort(a.begin(), a.end());
  const double n = double(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return d;
}

// Asymptotic Kolmogorov tail P(K > lambda) with the Stephens small-sample correction.
inline double ks_pvalue(double d, double n_eff) {
  const double sn = std::sqrt(n_eff);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace gmclab
