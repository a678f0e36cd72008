#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gmclab/predict.hpp"
#include "support/oracles.hpp"

using gmclab::cplx;
using gmclab::Symmetry;
namespace k = gmclab::constants;

TEST(CovV, DualFormsAgreeOnRandomTuples) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const cplx z1 = std::polar(0.9 * std::sqrt(u01(gen)), 2.0 * k::pi * u01(gen));
    const cplx z2 = std::polar(0.9 * std::sqrt(u01(gen)), 2.0 * k::pi * u01(gen));
    const double e1 = std::pow(10.0, -4.0 + 4.0 * u01(gen));
    const double e2 = std::pow(10.0, -4.0 + 4.0 * u01(gen));
    const auto f = gmclab::cov_v_forms(z1, e1, z2, e2);
    worst = std::max(worst, std::abs(f.main - f.alternate));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(CovV, CoincidentAsymptotic) {
  for (double r : {0.0, 0.5, 0.8})
    for (double eta : {1e-5, 1e-4, 1e-3}) {
      const cplx z = std::polar(r, 0.7);
      const double lead = -0.25 * std::log(2.0 * std::sqrt(1.0 - r * r) * eta);
      EXPECT_LE(std::abs(gmclab::cov_v(z, eta, z, eta) - lead), 20.0 * eta) << "r=" << r << " eta=" << eta;
    }
}

TEST(CovV, EnvelopeConstantBounded) {
  const double c = gmclab::testing::fitted_v_envelope({cplx(0.0), cplx(0.3, 0.2), cplx(-0.5, 0.4), cplx(0.7)});
  EXPECT_LE(c, 50.0);
}

TEST(CovV, BoundedAwayFromDiagonal) {
  const double v = gmclab::cov_v(cplx(0.1, 0.1), 0.0, cplx(0.6, 0.1), 0.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_LE(std::abs(v + 0.25 * std::log(0.25)), 1.0);
}

TEST(CovV, CoincidentSingular) {
  try {
    gmclab::cov_v(cplx(0.2, 0.1), 0.0, cplx(0.2, 0.1), 0.0);
    FAIL();
  } catch (const gmclab::Error& e) {
    EXPECT_EQ(e.code(), gmclab::Errc::coincident_singular);
  }
}

TEST(CovC, Composition) {
  gmclab::PairParams p{cplx(0.2, 0.3), cplx(-0.1, 0.4), 0.01, 0.02, Symmetry::complex, 0.0};
  EXPECT_EQ(gmclab::cov_c(p), gmclab::cov_v(p));
  gmclab::PairParams o{0.0, 0.0, 1e-9, 1e-9, Symmetry::complex, 1.3};
  EXPECT_NEAR(gmclab::cov_c(o) - gmclab::cov_v(o), 1.3 / 4.0, 1e-8);
  gmclab::PairParams a{cplx(0.2, 0.3), cplx(-0.1, 0.4), 0.01, 0.02, Symmetry::real, -1.0};
  gmclab::PairParams b = a;
  b.z2 = std::conj(a.z2);
  EXPECT_NEAR(gmclab::cov_c(a), gmclab::cov_c(b), 1e-13);
}

TEST(ExpectationCorrection, Cases) {
  EXPECT_EQ(gmclab::expectation_correction(cplx(0.3, 0.1), 0.01, Symmetry::complex, 0.0), 0.0);
  EXPECT_NEAR(gmclab::expectation_correction(0.0, 0.0, Symmetry::complex, 1.0), -0.25, 1e-12);
  const cplx z(0.2, 0.5);
  const double gap = std::norm(z - std::conj(z));
  for (double eta : {1e-3, 1e-4, 1e-5}) {
    const double log_term = -4.0 * gmclab::expectation_correction(z, eta, Symmetry::real, 0.0);
    EXPECT_LE(std::abs(log_term - std::log(gap)), 2.0 * eta / gap) << "eta=" << eta;
  }
}

TEST(KernelK, ValuesAndSymmetries) {
  EXPECT_NEAR(gmclab::kernel_k(0.0, 0.5, Symmetry::complex, 0.0), std::log(2.0) / 2.0, 1e-15);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int i = 0; i < 100; ++i) {
    const cplx z(u(gen), u(gen)), w(u(gen), u(gen));
    for (Symmetry s : {Symmetry::complex, Symmetry::real})
      EXPECT_EQ(gmclab::kernel_k(z, w, s, 0.7), gmclab::kernel_k(w, z, s, 0.7));
    EXPECT_NEAR(gmclab::kernel_k(z, w, Symmetry::real, 0.7), gmclab::kernel_k(z, std::conj(w), Symmetry::real, 0.7),
                1e-14);
  }
  EXPECT_EQ(gmclab::kernel_k(1.2, 0.1, Symmetry::complex, 0.0), 0.0);
  EXPECT_THROW(gmclab::kernel_k(0.3, 0.3, Symmetry::complex, 0.0), gmclab::Error);
  EXPECT_THROW(gmclab::kernel_k(cplx(0.3, 0.1), cplx(0.3, -0.1), Symmetry::real, 0.0), gmclab::Error);
}

TEST(KernelK, GramPositivity) {
  for (Symmetry s : {Symmetry::complex, Symmetry::real}) {
    const double beta = gmclab::beta_of(s);
    const auto pts = gmclab::testing::separated_points(200, 0.95, 1e-3, s, 41);
    for (double kap : {-4.0 / beta + 0.1, 0.0, 2.0}) {
      const auto r = gmclab::testing::symmetric_eigen_range(gmclab::testing::kernel_gram(pts, s, kap));
      EXPECT_GE(r.min, -1e-8 * r.max) << "beta=" << beta << " kappa4=" << kap;
    }
  }
}

TEST(KernelK, LimitOfCovariance) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Symmetry s : {Symmetry::complex, Symmetry::real})
    for (int i = 0; i < 200; ++i) {
      const cplx z = std::polar(0.6 * std::sqrt(u01(gen)), 2.0 * k::pi * u01(gen)) + cplx(0.0, s == Symmetry::real ? 0.2 : 0.0);
      const cplx w = z + std::polar(0.05 + 0.45 * u01(gen), 2.0 * k::pi * u01(gen));
      if (std::abs(w) >= 0.95 || (s == Symmetry::real && w.imag() < 0.05)) continue;
      const double kap = 2.0 * u01(gen) - 1.0;
      const double c = gmclab::cov_c({z, w, 0.0, 0.0, s, kap});
      EXPECT_LE(std::abs(2.0 * c - 2.0 * gmclab::kernel_k(z, w, s, kap)), 0.5) << z << " " << w;
    }
}

TEST(KPoint, DegenerateAndOnePoint) {
  gmclab::KPointQuery q{256, {cplx(0.1, 0.2), cplx(-0.3)}, {0.0, 0.0}, Symmetry::complex, 0.5};
  EXPECT_EQ(gmclab::kpoint_predict(q).log_value, cplx(0.0));
  for (double g : {0.5, 1.0, 2.0, 3.0}) {
    const gmclab::KPointQuery one{512, {0.0}, {g}, Symmetry::complex, 0.0};
    EXPECT_NEAR(std::abs(gmclab::kpoint_predict(one).log_value - gmclab::ginibre_asymptotic_moment(512, g)), 0.0, 1e-12);
  }
  const gmclab::KPointQuery kost{1024, {0.0}, {2.0}, Symmetry::complex, 0.0};
  EXPECT_LE(std::abs(gmclab::kpoint_predict(kost).log_value.real() - gmclab::ginibre_exact_moment(1024, 2.0).real()),
            10.0 / 1024);
}

TEST(KPoint, PartsAndMultiplicativity) {
  for (Symmetry s : {Symmetry::complex, Symmetry::real}) {
    const std::vector<cplx> pts{cplx(-0.4, 0.3), cplx(0.3, 0.6), cplx(0.2, -0.5)};
    const std::vector<cplx> gs{1.0, cplx(0.5, 0.2), 2.0};
    const gmclab::KPointQuery q{300, pts, gs, s, -0.7};
    const auto pr = gmclab::kpoint_predict(q);
    EXPECT_NEAR(std::abs(pr.log_value - gmclab::sum_parts(pr.parts)), 0.0, 1e-12);
    cplx singles = 0.0, cross = 0.0;
    std::vector<cplx> up = pts;
    if (s == Symmetry::real)
      for (auto& z : up) z = cplx(z.real(), std::abs(z.imag()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      singles += gmclab::kpoint_predict({300, {pts[i]}, {gs[i]}, s, -0.7}).log_value;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (i == j) continue;
        const double ri = std::norm(up[i]) - 1.0, rj = std::norm(up[j]) - 1.0;
        if (j > i) cross += -0.7 * gs[i] * gs[j] * ri * rj / 4.0 - 0.5 * gs[i] * gs[j] * std::log(std::abs(up[i] - up[j]));
        if (s == Symmetry::real) cross -= gs[i] * gs[j] / 8.0 * std::log(std::norm(up[i] - std::conj(up[j])));
      }
    }
    EXPECT_NEAR(std::abs(pr.log_value - singles - cross), 0.0, 1e-12);
    if (s == Symmetry::real) {
      ASSERT_EQ(pr.flags.reflected.size(), 1u);
      EXPECT_EQ(pr.flags.reflected[0], 2);
      EXPECT_NEAR(pr.flags.min_axis_distance_sqrt_n, 0.3 * std::sqrt(300.0), 1e-12);
    }
    const double sep = std::min({std::abs(up[0] - up[1]), std::abs(up[0] - up[2]), std::abs(up[1] - up[2])});
    EXPECT_NEAR(pr.flags.min_separation_sqrt_n, sep * std::sqrt(300.0), 1e-12);
    EXPECT_EQ(pr.flags.max_gamma, 2.0);
  }
}

TEST(KPoint, Errors) {
  auto code_of = [](const gmclab::KPointQuery& q) {
    try {
      gmclab::kpoint_predict(q);
    } catch (const gmclab::Error& e) {
      return e.code();
    }
    return gmclab::Errc::invalid_argument;
  };
  EXPECT_EQ(code_of({64, {cplx(0.3)}, {1.0}, Symmetry::real, 0.0}), gmclab::Errc::real_axis);
  EXPECT_EQ(code_of({64, {cplx(0.3, 0.1), cplx(0.3, 0.1)}, {1.0, 1.0}, Symmetry::complex, 0.0}),
            gmclab::Errc::coincident_points);
  EXPECT_THROW(gmclab::kpoint_predict({64, {cplx(0.3)}, {-2.5}, Symmetry::complex, 0.0}), gmclab::Error);
}

TEST(BoundEnvelope, Cases) {
  const double logn = std::log(256.0);
  EXPECT_NEAR(gmclab::bound_envelope({256, {0.2}, {2.0}, Symmetry::complex, 0.0}), 0.5 * logn, 1e-14);
  EXPECT_NEAR(gmclab::bound_envelope({256, {-0.6, 0.6}, {1.0, 1.0}, Symmetry::complex, 0.0}), 0.25 * logn, 1e-14);
  const double d = std::pow(256.0, -0.25);
  // two ordered pairs, each 1/8 * (-2 ln d) = 1/8 * (1/2 ln 256)
  const double ref = 2.0 / 8.0 * logn + 2.0 / 8.0 * (-2.0 * std::log(d));
  EXPECT_NEAR(gmclab::bound_envelope({256, {0.3, 0.3 + d}, {1.0, 1.0}, Symmetry::complex, 0.0}), ref, 1e-12);
  EXPECT_THROW(gmclab::bound_envelope({256, {0.3}, {-1.0}, Symmetry::complex, 0.0}), gmclab::Error);
}
