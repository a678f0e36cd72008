#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gmclab/ensembles.hpp"

using gmclab::EntryLaw;
using gmclab::LawKind;
using gmclab::Symmetry;

namespace {

// E chi^4 of the unit-variance real law by Monte Carlo with the library sampler.
double sampled_fourth_moment(const EntryLaw& law, int draws) {
  gmclab::Philox g(99, 1);
  gmclab::EntrySampler s(law);
  double m4 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double x = s(g);
    m4 += x * x * x * x;
  }
  return m4 / draws;
}

}  // namespace

TEST(Kappa4, ClosedForms) {
  EXPECT_EQ(gmclab::kappa4_of_law({LawKind::gaussian, {}}, Symmetry::complex), 0.0);
  EXPECT_EQ(gmclab::kappa4_of_law({LawKind::gaussian, {}}, Symmetry::real), 0.0);
  EXPECT_EQ(gmclab::kappa4_of_law({LawKind::symmetric_bernoulli, {}}, Symmetry::real), -2.0);
  // complex (a + ib)/sqrt2 with Bernoulli parts: E|chi|^4 = (1 + 2 + 1)/4 = 1, minus 2
  EXPECT_EQ(gmclab::kappa4_of_law({LawKind::symmetric_bernoulli, {}}, Symmetry::complex), -1.0);
  EXPECT_NEAR(gmclab::kappa4_of_law({LawKind::uniform, {}}, Symmetry::real), -1.2, 1e-15);
}

TEST(Kappa4, MatchesSampledMoments) {
  for (const EntryLaw& law : {EntryLaw{LawKind::uniform, {}}, EntryLaw{LawKind::two_point, {0.3}},
                              EntryLaw{LawKind::gaussian, {}}}) {
    const double m4 = sampled_fourth_moment(law, 400000);
    EXPECT_NEAR(m4, gmclab::real_fourth_moment(law), 0.05 * gmclab::real_fourth_moment(law)) << gmclab::law_name(law.kind);
  }
}

TEST(Kappa4, RejectsUnknownOrMalformedLaws) {
  EXPECT_THROW(gmclab::law_from_name("cauchy"), gmclab::Error);
  EXPECT_THROW(gmclab::validate_law({LawKind::two_point, {}}), gmclab::Error);
  EXPECT_THROW(gmclab::validate_law({LawKind::two_point, {1.2}}), gmclab::Error);
  EXPECT_THROW(gmclab::validate_law({LawKind::gaussian, {0.5}}), gmclab::Error);
  try {
    gmclab::law_from_name("cauchy");
  } catch (const gmclab::Error& e) {
    EXPECT_EQ(e.code(), gmclab::Errc::unsupported_law);
  }
}

TEST(SampleMatrix, Deterministic) {
  const auto spec = gmclab::make_ensemble(Symmetry::complex, {}, 40);
  const auto a = gmclab::sample_matrix(spec, {5, 9});
  const auto b = gmclab::sample_matrix(spec, {5, 9});
  EXPECT_TRUE(a.entries == b.entries);
  const auto c = gmclab::sample_matrix(spec, {5, 10});
  EXPECT_FALSE(a.entries == c.entries);
}

TEST(SampleMatrix, RealClassIsReal) {
  for (LawKind kind : {LawKind::gaussian, LawKind::symmetric_bernoulli, LawKind::uniform}) {
    const auto x = gmclab::sample_matrix(gmclab::make_ensemble(Symmetry::real, {kind, {}}, 30), {1, 2});
    EXPECT_EQ(x.entries.imag().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(SampleMatrix, EntryVarianceWithinFiveSigma) {
  const int n = 512;
  for (Symmetry sym : {Symmetry::complex, Symmetry::real})
    for (const EntryLaw& law : {EntryLaw{LawKind::gaussian, {}}, EntryLaw{LawKind::symmetric_bernoulli, {}},
                                EntryLaw{LawKind::uniform, {}}, EntryLaw{LawKind::two_point, {0.25}}}) {
      const auto spec = gmclab::make_ensemble(sym, law, n);
      const auto x = gmclab::sample_matrix(spec, {3, 4});
      const double nn = double(n) * n;
      const double mean_sq = x.entries.cwiseAbs2().sum() / nn;
      // Var(N|X|^2) = E|chi|^4 - 1 = kappa4 + 3 - beta
      const double sd = std::sqrt(std::max(spec.kappa4 + 3.0 - gmclab::beta_of(sym), 1e-12) / nn) / n;
      EXPECT_NEAR(mean_sq, 1.0 / n, 5.0 * sd + 1e-15) << gmclab::law_name(law.kind);
      const double mean_re = x.entries.real().sum() / nn;
      EXPECT_NEAR(mean_re, 0.0, 5.0 / std::sqrt(nn * n));
    }
}

TEST(SampleMatrix, ComplexSecondMomentVanishes) {
  const int n = 256;
  const auto x = gmclab::sample_matrix(gmclab::make_ensemble(Symmetry::complex, {}, n), {8, 1});
  const std::complex<double> m2 = (x.entries.array() * x.entries.array()).sum() / double(n * n);
  EXPECT_LT(std::abs(m2) * n, 5.0 * std::sqrt(2.0) / n);
}

TEST(SampleMatrix, DistinctStreamsUncorrelated) {
  const int n = 200;
  const auto spec = gmclab::make_ensemble(Symmetry::real, {}, n);
  const auto a = gmclab::sample_matrix(spec, {11, 0});
  const auto b = gmclab::sample_matrix(spec, {11, 1});
  const double corr = (a.entries.real().array() * b.entries.real().array()).sum() /
                      std::sqrt(a.entries.real().squaredNorm() * b.entries.real().squaredNorm());
  EXPECT_LT(std::abs(corr), 5.0 / n);
}

TEST(Ensemble, ValidatesKappa) {
  auto spec = gmclab::make_ensemble(Symmetry::real, {LawKind::symmetric_bernoulli, {}}, 10);
  EXPECT_NO_THROW(gmclab::validate_ensemble(spec));
  spec.kappa4 = 0.0;
  EXPECT_THROW(gmclab::validate_ensemble(spec), gmclab::Error);
  EXPECT_THROW(gmclab::make_ensemble(Symmetry::real, {}, 1), gmclab::Error);
}

TEST(Philox, MatchesReferenceStream) {
  // numpy.random.Philox(key=[7, 3], counter=0).random_raw(6)
  const std::uint64_t expected[] = {0x7b6cc7b1862cc5f2ull, 0xb960f2ea4b3f8d9full, 0x0cdd72e015deb1a6ull,
                                    0x50edb0d22a6a6fd5ull, 0xae45891bf7ab4df3ull, 0x32005aae5c700f2cull};
  gmclab::Philox g(7, 3);
  for (std::uint64_t e : expected) EXPECT_EQ(g(), e);
}
