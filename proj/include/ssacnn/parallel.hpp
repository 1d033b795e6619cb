#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssacnn {

// Global worker-thread cap for the OpenMP kernels. 0 means "runtime default".
void set_worker_threads(int n);
int worker_threads();

// Runs fn(i) for i in [0, n). Iterations must be independent; each writes
// only its own output slot, so the parallel schedule cannot change results
// relative to the serial loop.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
#ifdef _OPENMP
  const int nt = worker_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt > 0 ? nt : omp_get_max_threads())
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

// Serial reference loop with the same shape as parallel_for; kept so tests
// and the benchmark can compare the two paths.
template <typename Fn>
void serial_for(std::int64_t n, Fn&& fn) {
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace ssacnn
