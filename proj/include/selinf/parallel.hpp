#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selinf::parallel {

/// Thread cap: SELINF_THREADS env var if set, otherwise the OpenMP default.
/// A cap of 1 selects the serial path everywhere.
inline int max_threads() {
  if (const char* env = std::getenv("SELINF_THREADS")) {
    int t = std::atoi(env);
    if (t >= 1) return t;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs body(i) for i in [0, n). The parallel and serial paths must produce
/// bitwise-identical results: each index writes only to its own slot and
/// draws only from its own RNG stream. The serial path is the reference
/// implementation used by the determinism tests and the benchmark tool.
template <typename Body>
void for_each_index(long n, Body&& body, bool force_serial = false) {
  const int threads = force_serial ? 1 : max_threads();
  if (threads <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long i = 0; i < n; ++i) body(i);
#else
  for (long i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace selinf::parallel
