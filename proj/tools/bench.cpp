// Benchmark: the OpenMP scenario kernels against the serial reference path.
// Verifies bitwise-identical summaries, then reports timings and speedup.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "selinf/harness.hpp"
#include "selinf/parallel.hpp"

using namespace selinf;
using Clock = std::chrono::steady_clock;

namespace {

double time_run(const Scenario& sc, int reps, bool serial, SimResult* out) {
  const auto t0 = Clock::now();
  *out = run_scenario(sc, reps, 12345, serial);
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 200;
  std::printf("threads available: %d\n", parallel::max_threads());
  std::printf("%-22s %6s %10s %10s %8s %s\n", "scenario", "reps", "serial[s]",
              "openmp[s]", "speedup", "identical");

  for (const std::string name :
       {"pivot-uniformity", "ci-coverage", "gof-null", "fdr-by"}) {
    const Scenario& sc = find_scenario(name);
    SimResult ser, par;
    const double ts = time_run(sc, reps, true, &ser);
    const double tp = time_run(sc, reps, false, &par);
    bool same = ser.rows.size() == par.rows.size();
    if (same)
      for (std::size_t i = 0; i < ser.rows.size() && same; ++i)
        same = ser.rows[i] == par.rows[i];
    for (const auto& [k, v] : ser.summary)
      same = same && par.summary.count(k) && par.summary.at(k) == v;
    std::printf("%-22s %6d %10.3f %10.3f %8.2fx %s\n", name.c_str(), reps, ts,
                tp, ts / tp, same ? "yes" : "NO");
    if (!same) return 1;
  }
  return 0;
}
