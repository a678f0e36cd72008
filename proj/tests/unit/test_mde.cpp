#include <cmath>
#include <complex>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "gmclab/mde.hpp"

using gmclab::cplx;
namespace k = gmclab::constants;

namespace {

// Damped fixed-point iteration m <- -1/(w + m - |z|^2/(w + m)) in long double.
std::complex<long double> fixed_point_m(cplx z, cplx w) {
  using C = std::complex<long double>;
  const long double a = std::norm(std::complex<long double>(z.real(), z.imag()));
  const C ww(w.real(), w.imag());
  C m(0.0L, 1.0L);
  for (int it = 0; it < 200000; ++it) {
    const C next = -1.0L / (ww + m - a / (ww + m));
    const C upd = 0.5L * m + 0.5L * next;
    if (std::abs(upd - m) < 1e-19L) return upd;
    m = upd;
  }
  return m;
}

// Midpoint-free oracle for the quantile equation: plain bisection on the library cdf.
double bisect_quantile(cplx z, double edge, double target) {
  double lo = 0.0, hi = edge;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gmclab::density_cdf(z, edge, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(SolveMde, ClosedFormAtEtaZero) {
  const auto s = gmclab::solve_mde_imag(0.6, 0.0);
  EXPECT_NEAR(s.m.real(), 0.0, 1e-15);
  EXPECT_NEAR(s.m.imag(), 0.8, 1e-10);
  EXPECT_NEAR(s.u.real(), 1.0, 1e-12);
  for (double r : {0.0, 0.3, 0.9}) EXPECT_NEAR(gmclab::solve_mde_imag(r, 0.0).m.imag(), std::sqrt(1.0 - r * r), 1e-10);
}

TEST(SolveMde, FixedPointOracle) {
  const auto s = gmclab::solve_mde_imag(0.3, 0.1);
  const auto ref = fixed_point_m(0.3, cplx(0.0, 0.1));
  EXPECT_NEAR(s.m.real(), double(ref.real()), 1e-10);
  EXPECT_NEAR(s.m.imag(), double(ref.imag()), 1e-10);
  for (cplx w : {cplx(0.4, 0.2), cplx(-1.1, 0.05), cplx(2.5, 0.3)}) {
    const auto off = gmclab::solve_mde(cplx(0.2, 0.5), w);
    const auto r = fixed_point_m(cplx(0.2, 0.5), w);
    EXPECT_NEAR(std::abs(off.m - cplx(double(r.real()), double(r.imag()))), 0.0, 1e-10) << w;
  }
}

TEST(SolveMde, ResidualAndStabilityOnRandomInputs) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double r = 0.95 * std::sqrt(u01(gen));
    const cplx z = std::polar(r, 2.0 * k::pi * u01(gen));
    const double eta = std::pow(10.0, -6.0 + 6.0 * u01(gen));
    const cplx w = i % 2 ? cplx(0.0, eta) : cplx(3.0 * (u01(gen) - 0.5), eta);
    const auto s = gmclab::solve_mde(z, w);
    EXPECT_LT(gmclab::mde_residual(z, w, s.m), 1e-12 * std::max(1.0, 1.0 / std::abs(s.m))) << z << " " << w;
    EXPECT_GT(s.m.imag(), 0.0);
    EXPECT_NEAR(std::abs(s.u - s.m / (w + s.m)), 0.0, 1e-14 * std::abs(s.u) + 1e-15);
    if (w.real() == 0.0) {
      EXPECT_EQ(s.m.real(), 0.0);
      EXPECT_EQ(s.u.imag(), 0.0);
      const double sv = eta + s.m.imag();
      EXPECT_LT(std::abs(sv - (sv - eta) * (sv * sv + std::norm(z))), 1e-12);
    }
  }
}

TEST(SolveMde, ImaginaryPartLinearInEta) {
  for (double r : {0.0, 0.4, 0.7, 0.9}) {
    double cmax = 0.0;
    for (double eta : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
      const double d = std::abs(gmclab::solve_mde_imag(r, eta).m.imag() - std::sqrt(1.0 - r * r));
      cmax = std::max(cmax, d / eta);
    }
    EXPECT_LT(cmax, 10.0) << "r=" << r;
    // u = 1 - eta / sqrt(1 - |z|^2) + O(eta^2)
    const double eta = 1e-5;
    EXPECT_NEAR(gmclab::solve_mde_imag(r, eta).u.real(), 1.0 - eta / std::sqrt(1.0 - r * r), 50.0 * eta * eta);
  }
}

TEST(Density, BulkValuesAndNormalization) {
  EXPECT_NEAR(gmclab::density_at(0.0, 0.0), 1.0 / k::pi, 1e-12);
  EXPECT_NEAR(gmclab::density_at(0.8, 0.0), 0.6 / k::pi, 1e-12);
  for (double r : {0.0, 0.5, 0.8, 0.95}) {
    const auto prof = gmclab::density(r, 64);
    EXPECT_NEAR(2.0 * gmclab::density_cdf(r, prof.edge, prof.edge), 1.0, 1e-6) << "r=" << r;
    EXPECT_EQ(gmclab::density_at(r, prof.edge * 1.001), 0.0);
    EXPECT_GT(gmclab::density_at(r, prof.edge * 0.999), 0.0);
  }
  EXPECT_THROW(gmclab::density(0.2, 7), gmclab::Error);
}

TEST(Density, MatchesLimitOfStieltjesTransform) {
  const cplx z(0.3, 0.4);
  for (double x : {0.1, 0.7, 1.2}) {
    const double lim = gmclab::solve_mde(z, cplx(x, 1e-9)).m.imag() / k::pi;
    EXPECT_NEAR(gmclab::density_at(z, x), lim, 1e-7) << "x=" << x;
  }
}

TEST(Density, BulkRegularity) {
  for (double r : {0.0, 0.5, 0.9}) {
    const double edge = gmclab::support_edge(r);
    const double delta = 0.1 * edge;
    const double h = 1e-4;
    for (double x = 0.0; x <= edge - delta; x += 0.01) {
      EXPECT_GE(gmclab::density_at(r, x), 0.05);
      const double slope = (gmclab::density_at(r, x + h) - gmclab::density_at(r, std::max(0.0, x - h))) / (x < h ? h : 2 * h);
      EXPECT_LE(std::abs(slope), 10.0);
    }
  }
}

TEST(Quantiles, DefiningPropertyAndBounds) {
  const int n = 200;
  for (double r : {0.0, 0.6}) {
    const auto prof = gmclab::density(r, 64);
    const auto q = gmclab::quantiles(prof, n);
    for (int i = 1; i <= n; ++i) {
      EXPECT_NEAR(gmclab::density_cdf(r, prof.edge, q[i - 1]), double(i) / (2 * n), 1e-8) << "i=" << i;
      if (i > 1) EXPECT_GE(q[i - 1], q[i - 2]);
    }
    EXPECT_LE(q.back(), prof.edge);
  }
}

TEST(Quantiles, SmallIndexLinearization) {
  const auto prof = gmclab::density(0.0, 64);
  const auto q = gmclab::quantiles(prof, 512);
  const double ref = bisect_quantile(0.0, prof.edge, 1.0 / 1024.0);
  EXPECT_NEAR(q[0], ref, 1e-12);
  EXPECT_NEAR(q[0] / (k::pi / 1024.0), 1.0, 0.02);
}

TEST(Centering, EtaZeroIdentity) {
  EXPECT_NEAR(gmclab::centering_integral(0.0, 0.0).integral, -1.0, 1e-6);
  EXPECT_NEAR(gmclab::centering_integral(0.5, 0.0).integral, -0.75, 1e-6);
  for (double r : {0.2, 0.7, 0.9, 0.99})
    EXPECT_NEAR(gmclab::centering_integral(std::polar(r, 1.0), 0.0).integral, r * r - 1.0, 1e-6) << "r=" << r;
}

TEST(Centering, EtaDerivativeIsTwiceImM) {
  for (cplx z : {cplx(0.0), cplx(0.5), cplx(0.3, 0.6)}) {
    const double eta = 0.2, h = 1e-4;
    const double fd =
        (gmclab::centering_integral(z, eta + h).integral - gmclab::centering_integral(z, eta - h).integral) / (2 * h);
    EXPECT_NEAR(fd, 2.0 * gmclab::solve_mde_imag(z, eta).m.imag(), 1e-5);
  }
}

TEST(Centering, AgreesWithDirectQuadrature) {
  using boost::math::quadrature::gauss_kronrod;
  const cplx z(0.4, 0.1);
  const double eta = 0.05;
  const double edge = gmclab::support_edge(z);
  auto f = [&](double x) { return std::log(x * x + eta * eta) * gmclab::density_at(z, x); };
  double direct = 0.0;
  for (int j = 0; j < 64; ++j) direct += gauss_kronrod<double, 61>::integrate(f, edge * j / 64, edge * (j + 1) / 64, 5, 1e-13);
  EXPECT_NEAR(gmclab::centering_integral(z, eta).integral, 2.0 * direct, 1e-6);
}

TEST(TimeRescaled, Identities) {
  const cplx z(0.3, 0.2);
  const auto a = gmclab::time_rescaled_mde(z, 0.05, 0.0);
  const auto b = gmclab::solve_mde_imag(z, 0.05);
  EXPECT_EQ(a.m, b.m);
  EXPECT_NEAR(gmclab::time_rescaled_mde(0.0, 0.0, 3.0).m.imag(), 0.5, 1e-12);
  const double t = 0.7, c = std::sqrt(1.7);
  const auto r = gmclab::time_rescaled_mde(z, 0.1, t);
  const auto d = gmclab::solve_mde_imag(z / c, 0.1 / c);
  EXPECT_NEAR(std::abs(r.m - d.m / c), 0.0, 1e-12);
}

TEST(Characteristic, ClosedFormRateAtOrigin) {
  // At z = 0, Im m_t(i eta) = (-eta + sqrt(eta^2 + 4(1+t))) / (2(1+t)); integrate backward with fine midpoint steps.
  auto rate = [](long double t, long double eta) {
    return (-eta + std::sqrt(eta * eta + 4.0L * (1.0L + t))) / (2.0L * (1.0L + t));
  };
  const double big_t = 0.5;
  long double eta = 1e-10L;
  const int fine = 200000;
  const long double h = big_t / fine;
  for (int i = fine; i > 0; --i) {
    const long double t = h * i;
    const long double mid = eta + 0.5L * h * rate(t, eta);
    eta += h * rate(t - 0.5L * h, mid);
  }
  const auto ch = gmclab::characteristic_path(0.0, 1e-10, big_t, 400);
  EXPECT_NEAR(ch.eta.front(), double(eta), 1e-8);
  for (std::size_t i = 1; i < ch.eta.size(); ++i) EXPECT_LT(ch.eta[i], ch.eta[i - 1]);
  EXPECT_LT(ch.max_step_residual, 1e-8);
  // m_t is constant along a characteristic, so the travel is T Im m_T(i eta_T) -> T / sqrt(1+T)
  EXPECT_NEAR(ch.eta.front() - ch.eta.back(), big_t / std::sqrt(1.0 + big_t), 1e-8);
}

TEST(Characteristic, ShortTimeLinearization) {
  const double t = 1e-3, eta_t = 1e-4;
  const auto ch = gmclab::characteristic_path(0.5, eta_t, t, 50);
  EXPECT_LE(std::abs(ch.eta.front() - eta_t - t * std::sqrt(0.75)), 5.0 * t * (eta_t + t));
}

TEST(Characteristic, StepHalvingConverged) {
  const auto a = gmclab::characteristic_path(cplx(0.2, 0.3), 1e-3, 0.2, 100);
  const auto b = gmclab::characteristic_path(cplx(0.2, 0.3), 1e-3, 0.2, 200);
  EXPECT_LT(std::abs(a.eta.front() - b.eta.front()), 1e-9);
  EXPECT_THROW(gmclab::characteristic_path(0.0, 1e-3, 0.2, 0), gmclab::Error);
}
