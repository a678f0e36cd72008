#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gmclab {

// Runs fn(i) for i in [0, count); each index writes only its own output slot,
// so results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex guard;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers > 0 ? workers : 1)
#endif
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gmclab
