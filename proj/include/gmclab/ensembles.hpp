#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gmclab/error.hpp"
#include "gmclab/rng.hpp"

namespace gmclab {

enum class Symmetry : int { real = 1, complex = 2 };

inline int beta_of(Symmetry s) { return static_cast<int>(s); }

inline Symmetry symmetry_from_beta(int beta) {
  if (beta == 1) return Symmetry::real;
  if (beta == 2) return Symmetry::complex;
  throw Error(Errc::invalid_argument, "beta must be 1 or 2");
}

enum class LawKind { gaussian, symmetric_bernoulli, uniform, two_point };

struct EntryLaw {
  LawKind kind = LawKind::gaussian;
  std::vector<double> params;  // two_point: {p}
};

inline const char* law_name(LawKind k) {
  switch (k) {
    case LawKind::gaussian: return "gaussian";
    case LawKind::symmetric_bernoulli: return "symmetric-bernoulli";
    case LawKind::uniform: return "uniform";
    case LawKind::two_point: return "two-point";
  }
  return "?";
}

inline LawKind law_from_name(const std::string& name) {
  if (name == "gaussian") return LawKind::gaussian;
  if (name == "symmetric-bernoulli") return LawKind::symmetric_bernoulli;
  if (name == "uniform") return LawKind::uniform;
  if (name == "two-point") return LawKind::two_point;
  throw Error(Errc::unsupported_law, "unknown entry law '" + name + "'");
}

inline void validate_law(const EntryLaw& law) {
  if (law.kind == LawKind::two_point) {
    if (law.params.size() != 1 || !(law.params[0] > 0.0 && law.params[0] < 1.0))
      throw Error(Errc::unsupported_law, "two-point law needs one parameter p in (0,1)");
  } else if (!law.params.empty()) {
    throw Error(Errc::unsupported_law, std::string(law_name(law.kind)) + " takes no parameters");
  }
}

// E a^4 of the real unit-variance variable a.
inline double real_fourth_moment(const EntryLaw& law) {
  validate_law(law);
  switch (law.kind) {
    case LawKind::gaussian: return 3.0;
    case LawKind::symmetric_bernoulli: return 1.0;
    case LawKind::uniform: return 9.0 / 5.0;
    case LawKind::two_point: {
      const double p = law.params[0];
      const double q = 1.0 - p;
      return (q * q * q + p * p * p) / (p * q);
    }
  }
  throw Error(Errc::unsupported_law, "unreachable");
}

// E|chi|^4 - (4 - beta); complex entries are (a + i b)/sqrt(2).
inline double kappa4_of_law(const EntryLaw& law, Symmetry sym) {
  const double m4 = real_fourth_moment(law);
  if (sym == Symmetry::real) return m4 - 3.0;
  return 0.5 * (m4 + 1.0) - 2.0;
}

struct EnsembleSpec {
  Symmetry symmetry = Symmetry::complex;
  EntryLaw law;
  int n = 2;
  double kappa4 = 0.0;
};

inline EnsembleSpec make_ensemble(Symmetry sym, EntryLaw law, int n) {
  if (n < 2) throw Error(Errc::invalid_argument, "n must be >= 2");
  EnsembleSpec s{sym, std::move(law), n, 0.0};
  s.kappa4 = kappa4_of_law(s.law, sym);
  return s;
}

inline void validate_ensemble(const EnsembleSpec& s) {
  if (s.n < 2) throw Error(Errc::invalid_argument, "n must be >= 2");
  const double k = kappa4_of_law(s.law, s.symmetry);
  if (std::abs(k - s.kappa4) > 1e-12)
    throw Error(Errc::invalid_argument, "kappa4 inconsistent with the entry law");
  if (s.kappa4 < -4.0 / beta_of(s.symmetry))
    throw Error(Errc::invalid_argument, "kappa4 below -4/beta");
}

// One real unit-variance variate of the given law.
class EntrySampler {
 public:
  explicit EntrySampler(const EntryLaw& law) : law_(law) {
    validate_law(law_);
    if (law_.kind == LawKind::two_point) {
      const double p = law_.params[0];
      hi_ = std::sqrt((1.0 - p) / p);
      lo_ = -std::sqrt(p / (1.0 - p));
    }
  }

  double operator()(Philox& g) {
    switch (law_.kind) {
      case LawKind::gaussian: return normal_(g);
      case LawKind::symmetric_bernoulli: return (g() >> 63) ? 1.0 : -1.0;
      case LawKind::uniform: return std::sqrt(3.0) * (2.0 * uniform01(g) - 1.0);
      case LawKind::two_point: return uniform01(g) < law_.params[0] ? hi_ : lo_;
    }
    return 0.0;
  }

 private:
  EntryLaw law_;
  std::normal_distribution<double> normal_;
  double hi_ = 0.0, lo_ = 0.0;
};

struct MatrixDraw {
  Eigen::MatrixXcd entries;
  Symmetry symmetry = Symmetry::complex;
  StreamId seed;

  int n() const { return static_cast<int>(entries.rows()); }
};

// Entries filled column-major from one Philox stream; the result depends only on (spec, seed).
inline MatrixDraw sample_matrix(const EnsembleSpec& spec, StreamId seed) {
  if (spec.n < 2) throw Error(Errc::invalid_argument, "n must be >= 2");
  Philox g(seed);
  EntrySampler draw(spec.law);
  const int n = spec.n;
  const double scale = 1.0 / std::sqrt(double(n));
  MatrixDraw out{Eigen::MatrixXcd(n, n), spec.symmetry, seed};
  if (spec.symmetry == Symmetry::real) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out.entries(i, j) = scale * draw(g);
  } else {
    const double cs = scale / std::sqrt(2.0);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double a = draw(g);
        const double b = draw(g);
        out.entries(i, j) = {cs * a, cs * b};
      }
  }
  return out;
}

inline MatrixDraw sample_ginibre(int n, Symmetry sym, StreamId seed) {
  return sample_matrix(make_ensemble(sym, EntryLaw{}, n), seed);
}

}  // namespace gmclab
