#pragma once

#include <cmath>
#include <complex>

#include "gmclab/error.hpp"

namespace gmclab {

using cplx = std::complex<double>;

namespace constants {
inline constexpr double pi = 3.14159265358979323846264338327950288;
inline constexpr double ln_2pi = 1.83787706640934548356065947281123527;
inline constexpr double euler_gamma = 0.577215664901532860606512090082;
// zeta'(-1) = 1/12 - ln A (Glaisher-Kinkelin)
inline constexpr double zeta_prime_m1 = -0.165421143700450929213919660240;
}  // namespace constants

namespace detail {

// Stirling series for ln Gamma, valid for Re z >= 15.
inline cplx lgamma_stirling(cplx z) {
  static constexpr double coef[] = {1.0 / 12.0,        -1.0 / 360.0,     1.0 / 1260.0,
                                    -1.0 / 1680.0,     1.0 / 1188.0,     -691.0 / 360360.0,
                                    1.0 / 156.0,       -3617.0 / 122400.0};
  const cplx inv = 1.0 / z;
  const cplx inv2 = inv * inv;
  cplx series = 0.0;
  cplx p = inv;
  for (double c : coef) {
    series += c * p;
    p *= inv2;
  }
  return (z - 0.5) * std::log(z) - z + 0.5 * constants::ln_2pi + series;
}

// ln G(1+v) asymptotic series, valid for Re v >= 19.
inline cplx log_barnes_g1p_asymptotic(cplx v) {
  // B_{2k+2} / (4k(k+1)), k = 1..8
  static constexpr double coef[] = {
      (-1.0 / 30.0) / 8.0,           (1.0 / 42.0) / 24.0,     (-1.0 / 30.0) / 48.0,
      (5.0 / 66.0) / 80.0,           (-691.0 / 2730.0) / 120.0, (7.0 / 6.0) / 168.0,
      (-3617.0 / 510.0) / 224.0,     (43867.0 / 798.0) / 288.0};
  const cplx inv2 = 1.0 / (v * v);
  cplx series = 0.0;
  cplx p = inv2;
  for (double c : coef) {
    series += c * p;
    p *= inv2;
  }
  const cplx v2 = v * v;
  return (0.5 * v2 - 1.0 / 12.0) * std::log(v) - 0.75 * v2 + 0.5 * v * constants::ln_2pi +
         constants::zeta_prime_m1 + series;
}

}  // namespace detail

// Principal-branch ln Gamma for Re z > 0, continuous in z.
inline cplx lgamma_complex(cplx z) {
  if (!(z.real() > 0.0)) throw Error(Errc::domain, "lgamma_complex requires Re z > 0");
  cplx shift = 0.0;
  while (z.real() < 15.0) {
    shift += std::log(z);
    z += 1.0;
  }
  return detail::lgamma_stirling(z) - shift;
}

// ln G(z) for Re z > 0 via upward recurrence and the large-argument series.
inline cplx log_barnes_g(cplx z) {
  if (!(z.real() > 0.0)) throw Error(Errc::domain, "log_barnes_g requires Re z > 0");
  if (std::abs(z) > 1e6) throw Error(Errc::domain, "log_barnes_g argument too large");
  if (z == cplx(1.0) || z == cplx(2.0)) return 0.0;
  cplx shift = 0.0;
  while (z.real() < 20.0) {
    shift += lgamma_complex(z);  // ln G(z+1) = ln G(z) + ln Gamma(z)
    z += 1.0;
  }
  return detail::log_barnes_g1p_asymptotic(z - 1.0) - shift;
}

inline double log_barnes_g(double x) { return log_barnes_g(cplx(x)).real(); }

// G(1 + lambda/2) / (2 pi)^{lambda/4}
inline cplx g_constant(cplx lambda) {
  if (!(lambda.real() > -2.0)) throw Error(Errc::domain, "g_constant requires Re lambda > -2");
  return std::exp(log_barnes_g(1.0 + 0.5 * lambda) - 0.25 * lambda * constants::ln_2pi);
}

inline cplx log_g_constant(cplx lambda) {
  if (!(lambda.real() > -2.0)) throw Error(Errc::domain, "g_constant requires Re lambda > -2");
  return log_barnes_g(1.0 + 0.5 * lambda) - 0.25 * lambda * constants::ln_2pi;
}

// ln E|det X|^gamma for complex Ginibre with entry variance 1/N.
inline cplx ginibre_exact_moment(int n, cplx gamma) {
  if (n < 1) throw Error(Errc::domain, "n must be >= 1");
  if (!(gamma.real() > -2.0)) throw Error(Errc::domain, "Re gamma must exceed -2");
  if (gamma == cplx(0.0)) return 0.0;
  const double nn = n;
  return -0.5 * nn * gamma * std::log(nn) + log_barnes_g(nn + 1.0 + 0.5 * gamma) -
         log_barnes_g(cplx(nn + 1.0)) - log_barnes_g(1.0 + 0.5 * gamma);
}

// Same quantity from the product of independent Gamma moments.
inline cplx ginibre_exact_moment_gamma_sum(int n, cplx gamma) {
  if (n < 1) throw Error(Errc::domain, "n must be >= 1");
  if (!(gamma.real() > -2.0)) throw Error(Errc::domain, "Re gamma must exceed -2");
  cplx acc = 0.0;
  for (int j = 1; j <= n; ++j) acc += lgamma_complex(double(j) + 0.5 * gamma) - std::lgamma(double(j));
  return acc - 0.5 * double(n) * gamma * std::log(double(n));
}

inline cplx ginibre_asymptotic_moment(int n, cplx gamma) {
  if (n < 1) throw Error(Errc::domain, "n must be >= 1");
  if (!(gamma.real() > -2.0)) throw Error(Errc::domain, "Re gamma must exceed -2");
  if (gamma == cplx(0.0)) return 0.0;
  const double nn = n;
  return -0.5 * gamma * nn + gamma * gamma / 8.0 * std::log(nn) +
         0.25 * gamma * constants::ln_2pi - log_barnes_g(1.0 + 0.5 * gamma);
}

}  // namespace gmclab
