#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "gmclab/backend.hpp"
#include "gmclab/ensembles.hpp"
#include "gmclab/error.hpp"
#include "gmclab/mde.hpp"

namespace gmclab {

// Ascending singular values of a general complex matrix (LAPACK zgesdd, values only).
inline std::vector<double> singular_values(const Eigen::MatrixXcd& a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  const lapack_int m = static_cast<lapack_int>(a.cols());
  Eigen::MatrixXcd work = a;
  std::vector<double> s(std::min(n, m));
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', n, m,
                                         reinterpret_cast<lapack_complex_double*>(work.data()), n,
                                         s.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw Error(Errc::backend, "zgesdd failed with info " + std::to_string(info));
  std::reverse(s.begin(), s.end());
  return s;
}

// Eigenvalues of the draw: dgeev for real draws, zgeev otherwise.
inline std::vector<cplx> eigenvalues(const MatrixDraw& x) {
  const lapack_int n = x.n();
  std::vector<cplx> out(n);
  if (x.symmetry == Symmetry::real) {
    check_backend();
    Eigen::MatrixXd a = x.entries.real();
    std::vector<double> wr(n), wi(n);
    const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, wr.data(),
                                          wi.data(), nullptr, 1, nullptr, 1);
    if (info != 0) throw Error(Errc::backend, "dgeev failed with info " + std::to_string(info));
    for (lapack_int i = 0; i < n; ++i) out[i] = {wr[i], wi[i]};
  } else {
    Eigen::MatrixXcd a = x.entries;
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n,
                                          reinterpret_cast<lapack_complex_double*>(a.data()), n,
                                          reinterpret_cast<lapack_complex_double*>(out.data()),
                                          nullptr, 1, nullptr, 1);
    if (info != 0) throw Error(Errc::backend, "zgeev failed with info " + std::to_string(info));
  }
  return out;
}

struct SpectralSample {
  cplx z;
  int n = 0;
  std::vector<double> sigma;  // ascending
};

// Real draws are evaluated at the upper representative of {z, conj z}, so the result is conjugation-invariant.
inline SpectralSample hermitize_singular_values(const MatrixDraw& x, cplx z) {
  Eigen::MatrixXcd a = x.entries;
  a.diagonal().array() -= x.symmetry == Symmetry::real ? cplx(z.real(), std::abs(z.imag())) : z;
  return {z, x.n(), singular_values(a)};
}

// 2N x 2N Hermitization [[0, X - z], [(X - z)^*, 0]]; small-N oracle only.
inline Eigen::MatrixXcd dense_hermitization(const Eigen::MatrixXcd& x, cplx z) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXcd y = x;
  y.diagonal().array() -= z;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  h.topRightCorner(n, n) = y;
  h.bottomLeftCorner(n, n) = y.adjoint();
  return h;
}

struct LogDet {
  double value = 0.0;    // log|det|
  double min_ratio = 0;  // min |U_ii| / max |U_ii|
};

// log|det(X - z)| via partial-pivot LU, accumulated in the log domain.
inline LogDet log_abs_det_shifted(const Eigen::MatrixXcd& x, cplx z) {
  Eigen::MatrixXcd a = x;
  a.diagonal().array() -= z;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const auto& f = lu.matrixLU();
  double acc = 0.0, lo = INFINITY, hi = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double d = std::abs(f(i, i));
    acc += std::log(d);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {acc, hi > 0.0 ? lo / hi : 0.0};
}

struct RegularizedLogDet {
  cplx z;
  double eta = 0.0;
  double value = 0.0;
};

// sum_i (1/2) log(sigma_i^2 + eta^2), the random part of the regularized field.
inline double half_log_sum(const SpectralSample& s, double eta) {
  double acc = 0.0;
  for (double l : s.sigma) acc += 0.5 * std::log(l * l + eta * eta);
  return acc;
}

inline RegularizedLogDet phi_n(const SpectralSample& s, double eta, const MdeCenterings& c) {
  if (!(eta >= 0.0)) throw Error(Errc::domain, "eta must be >= 0");
  if (c.z != s.z || c.eta != eta) throw Error(Errc::centering_mismatch, "centering computed at a different (z, eta)");
  if (eta == 0.0) {
    const double hi = s.sigma.empty() ? 0.0 : s.sigma.back();
    if (s.sigma.empty() || !(s.sigma.front() >= 1e-13 * hi) || s.sigma.front() == 0.0)
      throw Error(Errc::singular_determinant, "numerically zero singular value at eta = 0");
  }
  return {s.z, eta, half_log_sum(s, eta) - 0.5 * s.n * c.integral};
}

// i (1/N) sum eta / (sigma^2 + eta^2)
inline cplx empirical_stieltjes(const SpectralSample& s, double eta) {
  if (!(eta > 0.0)) throw Error(Errc::nonpositive_eta, "eta must be > 0");
  double acc = 0.0;
  for (double l : s.sigma) acc += eta / (l * l + eta * eta);
  return {0.0, acc / s.n};
}

inline double resolvent_deviation(const SpectralSample& s, const MdeSolution& mde, double eta) {
  return std::abs(empirical_stieltjes(s, eta) - mde.m);
}

// Field log|det(X - z)| + N(1 - |z|^2)_+/2 from the eigenvalues of X.
inline double field_from_eigenvalues(const std::vector<cplx>& eig, cplx z) {
  double acc = 0.0;
  for (const cplx& l : eig) acc += std::log(std::abs(l - z));
  const double n = static_cast<double>(eig.size());
  return acc + 0.5 * n * std::max(0.0, 1.0 - std::norm(z));
}

}  // namespace gmclab
