#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "gmclab/special.hpp"

namespace {

using gmclab::cplx;
namespace k = gmclab::constants;

// ln G(1+z) from the Weierstrass product truncated at K terms, plus the leading tail z^3/(3K) - z^4/(8K^2).
double weierstrass_log_g1p(double z, long terms = 2000000) {
  double acc = 0.5 * z * k::ln_2pi - 0.5 * (z + z * z * (1.0 + k::euler_gamma));
  for (long n = terms; n >= 1; --n) {
    const double kk = double(n);
    acc += kk * std::log1p(z / kk) - z + z * z / (2.0 * kk);
  }
  const double kk = double(terms);
  return acc + z * z * z / (3.0 * kk) - z * z * z * z / (8.0 * kk * kk);
}

// ln E|det X|^gamma from the Gamma-variable product with real std::lgamma.
double gamma_product_log_moment(int n, double gamma) {
  double acc = 0.0;
  for (int j = 1; j <= n; ++j) acc += std::lgamma(j + 0.5 * gamma) - std::lgamma(double(j));
  return acc - 0.5 * n * gamma * std::log(double(n));
}

double log_factorial_product(int m) {  // ln G(m+1) = sum_{k=1}^{m-1} ln k!
  double acc = 0.0;
  for (int j = 1; j < m; ++j) acc += std::lgamma(j + 1.0);
  return acc;
}

}  // namespace

TEST(BarnesG, SmallIntegers) {
  EXPECT_EQ(gmclab::log_barnes_g(1.0), 0.0);
  EXPECT_EQ(gmclab::log_barnes_g(2.0), 0.0);
  EXPECT_NEAR(std::exp(gmclab::log_barnes_g(4.0)), 2.0, 1e-10);
  EXPECT_NEAR(std::exp(gmclab::log_barnes_g(5.0)), 12.0, 1e-9);
  for (int m = 1; m <= 60; ++m)
    EXPECT_NEAR(gmclab::log_barnes_g(m + 1.0), log_factorial_product(m), 1e-10 * std::max(1.0, log_factorial_product(m)))
        << "m=" << m;
}

TEST(BarnesG, RecurrenceOnGrid) {
  for (double z = 0.5; z <= 9.5 + 1e-12; z += 0.5) {
    const double lhs = gmclab::log_barnes_g(z + 1.0) - gmclab::log_barnes_g(z);
    EXPECT_NEAR(lhs, std::lgamma(z), 1e-10) << "z=" << z;
  }
}

TEST(BarnesG, ComplexRecurrence) {
  for (double re : {0.3, 1.7, 6.2, 25.0})
    for (double im : {-3.0, 0.5, 2.0}) {
      const cplx z(re, im);
      const cplx d = gmclab::log_barnes_g(z + 1.0) - gmclab::log_barnes_g(z) - gmclab::lgamma_complex(z);
      // equality modulo 2 pi i branch choice
      EXPECT_NEAR(d.real(), 0.0, 1e-10);
      EXPECT_NEAR(std::remainder(d.imag(), 2.0 * k::pi), 0.0, 1e-9);
    }
}

TEST(BarnesG, WeierstrassProductAgreement) {
  for (double z : {0.1, 0.25, 0.5, 0.9}) {
    EXPECT_NEAR(gmclab::log_barnes_g(1.0 + z), weierstrass_log_g1p(z), 1e-6) << "z=" << z;
  }
}

TEST(BarnesG, LargeArgument) {
  // ln G(N+1) against the factorial product at N = 300
  EXPECT_NEAR(gmclab::log_barnes_g(301.0) / log_factorial_product(300), 1.0, 1e-12);
}

TEST(BarnesG, DomainErrors) {
  EXPECT_THROW(gmclab::log_barnes_g(cplx(0.0)), gmclab::Error);
  EXPECT_THROW(gmclab::log_barnes_g(cplx(-1.5, 1.0)), gmclab::Error);
  EXPECT_THROW(gmclab::log_barnes_g(cplx(2e6)), gmclab::Error);
  EXPECT_THROW(gmclab::g_constant(cplx(-2.0)), gmclab::Error);
}

TEST(GConstant, ClosedForms) {
  EXPECT_NEAR(gmclab::g_constant(0.0).real(), 1.0, 1e-14);
  EXPECT_NEAR(gmclab::g_constant(2.0).real(), 1.0 / std::sqrt(2.0 * k::pi), 1e-12);
  EXPECT_NEAR(gmclab::g_constant(4.0).real(), 1.0 / (2.0 * k::pi), 1e-12);
  EXPECT_NEAR(gmclab::log_g_constant(1.0).real(), std::log(gmclab::g_constant(1.0).real()), 1e-13);
}

TEST(GinibreMoment, SmallNClosedForms) {
  EXPECT_NEAR(gmclab::ginibre_exact_moment(3, 2.0).real(), std::log(2.0 / 9.0), 1e-12);
  EXPECT_NEAR(gmclab::ginibre_exact_moment(1, 2.0).real(), 0.0, 1e-12);
  EXPECT_EQ(gmclab::ginibre_exact_moment(17, 0.0).real(), 0.0);
  // E|det|^2 = N!/N^N
  for (int n : {2, 5, 10, 40})
    EXPECT_NEAR(gmclab::ginibre_exact_moment(n, 2.0).real(), std::lgamma(n + 1.0) - n * std::log(double(n)), 1e-9);
}

TEST(GinibreMoment, BarnesPathMatchesGammaProduct) {
  for (double g : {0.5, 1.0, 2.0, 3.7})
    for (int n = 1; n <= 200; ++n) {
      const double ref = gamma_product_log_moment(n, g);
      EXPECT_NEAR(gmclab::ginibre_exact_moment(n, g).real(), ref, 1e-9) << "n=" << n << " gamma=" << g;
      EXPECT_NEAR(gmclab::ginibre_exact_moment_gamma_sum(n, g).real(), ref, 1e-9);
    }
}

TEST(GinibreMoment, AsymptoticRatio) {
  const int n = 1024;
  for (double g : {0.5, 1.0, 2.0, 3.0}) {
    const double d = gmclab::ginibre_exact_moment(n, g).real() - gmclab::ginibre_asymptotic_moment(n, g).real();
    EXPECT_LE(std::abs(std::expm1(d)), 10.0 * g / n) << "gamma=" << g;
  }
  EXPECT_EQ(gmclab::ginibre_asymptotic_moment(n, 0.0).real(), 0.0);
}

TEST(GinibreMoment, LogConvexInGamma) {
  const int n = 50;
  const double h = 0.05;
  auto f = [&](double g) { return gmclab::ginibre_exact_moment(n, g).real() + 0.5 * g * n; };
  for (double g = h; g <= 4.0; g += 0.1) EXPECT_GE(f(g + h) - 2.0 * f(g) + f(g - h), -1e-9) << "gamma=" << g;
}
