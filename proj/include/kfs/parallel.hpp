#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kfs {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_num_procs();
#else
  return 1;
#endif
}

/// Sets the worker count. Zero or negative falls back to KFS_THREADS, then
/// to the hardware parallelism.
inline void set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("KFS_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = hardware_threads();
#ifdef _OPENMP
  omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

inline int current_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs body(i) for i in [0, count). Iterations must write disjoint outputs;
/// no reduction happens here, so results are schedule independent.
template <typename Index, typename Body>
void parallel_for(Index count, Body&& body) {
#ifdef _OPENMP
  if (count > 1 && !omp_in_parallel() && omp_get_max_threads() > 1) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) body(static_cast<Index>(i));
    return;
  }
#endif
  for (Index i = 0; i < count; ++i) body(i);
}

}  // namespace kfs
