// SPDX-License-Identifier: Apache-2.0
//
// Compares the serial reference group rollout against the OpenMP kernel
// and verifies the trajectories are bit-identical.

#include <chrono>
#include <cstdio>
#include <vector>

#include "ngrpo/neighbor.hpp"
#include "ngrpo/solvers.hpp"
#include "ngrpo/velocity.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace ngrpo;

namespace {

double run_case(const VelocityModel& model, SolverKind solver,
                const TimeSchedule& sched, const std::vector<Vec>& inits,
                const SdeConfig* sde, bool parallel, int reps,
                std::vector<Trajectory>& last) {
  const RngStream base(99);
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r)
    last = parallel ? rollout_group(model, solver, sched, inits, {}, base, true, sde)
                    : rollout_group_serial(model, solver, sched, inits, {}, base, sde);
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
             .count() /
         reps;
}

bool identical(const std::vector<Trajectory>& a, const std::vector<Trajectory>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].states.size() != b[i].states.size()) return false;
    for (std::size_t j = 0; j < a[i].states.size(); ++j)
      if (a[i].states[j] != b[i].states[j]) return false;
  }
  return true;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; parallel path falls back to serial\n");
#endif

  RngStream rng(7);
  RngStream init = rng.fork(0);
  VelocityModel model = VelocityModel::random_init(2, 0, {64, 64, 64}, init);

  std::printf("%-28s %10s %10s %8s %8s\n", "case", "serial ms", "omp ms", "speedup",
              "equal");
  for (const int G : {12, 64, 256}) {
    for (const int T : {8, 64}) {
      const TimeSchedule sched = TimeSchedule::uniform(T);
      const SdeConfig sde = SdeConfig::make(sched, 0.3);
      std::vector<Vec> inits;
      for (int i = 0; i < G; ++i) inits.push_back(gaussian_sample(rng, 2));
      for (const SolverKind solver : {SolverKind::euler, SolverKind::sde}) {
        const int reps = G >= 256 ? 5 : 20;
        std::vector<Trajectory> serial_out, parallel_out;
        const double ms_serial = run_case(model, solver, sched, inits,
                                          solver == SolverKind::sde ? &sde : nullptr,
                                          false, reps, serial_out);
        const double ms_parallel = run_case(model, solver, sched, inits,
                                            solver == SolverKind::sde ? &sde : nullptr,
                                            true, reps, parallel_out);
        char label[64];
        std::snprintf(label, sizeof(label), "G=%d T=%d %s", G, T, solver_name(solver));
        std::printf("%-28s %10.3f %10.3f %8.2f %8s\n", label, ms_serial, ms_parallel,
                    ms_serial / ms_parallel,
                    identical(serial_out, parallel_out) ? "yes" : "NO");
      }
    }
  }
  return 0;
}
