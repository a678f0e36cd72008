#pragma once

#include <cstdlib>
#include <cstring>
#include <random>

#include <unistd.h>

#include <Eigen/Dense>
#include <lapacke.h>

#include "gmclab/error.hpp"

extern "C" char* openblas_get_corename(void);

namespace gmclab {

// OpenBLAS 0.3.20 returns wrong real double eigen results with its Cooperlake kernels.
inline bool blas_kernel_faulty() {
  const char* core = openblas_get_corename();
  return core && std::strcmp(core, "Cooperlake") == 0 && std::getenv("OPENBLAS_CORETYPE") == nullptr;
}

// Call first in main: restarts the process with a working kernel set when needed.
inline void select_blas_kernel(char** argv) {
  if (!blas_kernel_faulty()) return;
  setenv("OPENBLAS_CORETYPE", "Haswell", 1);
  execv("/proc/self/exe", argv);
}

// Symmetric eigen-reconstruction probe run once per process.
inline void check_backend() {
  static const bool ok = [] {
    const int n = 96;
    std::mt19937_64 gen(12345);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd b(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) b(i, j) = normal(gen);
    const Eigen::MatrixXd a = b * b.transpose();
    Eigen::MatrixXd v = a;
    Eigen::VectorXd w(n);
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, v.data(), n, w.data()) != 0) return false;
    return (v * w.asDiagonal() * v.transpose() - a).norm() <= 1e-10 * a.norm();
  }();
  if (!ok) throw Error(Errc::backend, "LAPACK backend failed its self-test; set OPENBLAS_CORETYPE=Haswell");
}

}  // namespace gmclab
