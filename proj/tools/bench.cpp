// Timing harness for the per-agent kernels: serial reference vs OpenMP.
// The two paths must produce identical traces; this tool checks that while
// measuring round throughput and the joint projection used by the solver.

#include "pevccp/distributed.hpp"
#include "pevccp/model.hpp"
#include "pevccp/netsim.hpp"
#include "pevccp/oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#if defined(_OPENMP)
#include <omp.h>
#endif

using namespace pevccp;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

RunTrace timed_run(const Scenario& s, const Graph& g, const ScheduleSet& sched, int iters,
                   Execution exec, double* elapsed_ms) {
  RunOptions opts;
  opts.iters = iters;
  opts.record_every = iters;  // metrics out of the timed loop
  opts.exec = exec;
  auto start = Clock::now();
  RunTrace trace = run_distributed(s, g, sched, opts);
  *elapsed_ms = ms_since(start);
  return trace;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"round-engine benchmark: serial reference vs OpenMP kernels"};
  int v = 20, t = 96, iters = 200;
  uint64_t seed = 1;
  app.add_option("--v", v, "fleet size");
  app.add_option("--t", t, "time steps");
  app.add_option("--iters", iters, "rounds per measurement");
  app.add_option("--seed", seed, "scenario seed");
  CLI11_PARSE(app, argc, argv);

  Scenario s = generate_scenario(seed, v, t, ScenarioProfile::paperlike());
  Graph g = make_topology(TopologyKind::Ring, v);
  ScheduleSet sched = ScheduleSet::defaults();

  int threads = 1;
#if defined(_OPENMP)
  threads = omp_get_max_threads();
#endif
  std::printf("V=%d T=%d rounds=%d threads=%d\n\n", v, t, iters, threads);

  double serial_ms = 0.0, omp_ms = 0.0;
  RunTrace ref = timed_run(s, g, sched, iters, Execution::Serial, &serial_ms);
  RunTrace par = timed_run(s, g, sched, iters, Execution::OpenMp, &omp_ms);

  double diff = (ref.final_x - par.final_x).cwiseAbs().maxCoeff();
  std::printf("%-22s %10.1f ms  %8.3f ms/round\n", "rounds (serial)", serial_ms,
              serial_ms / iters);
  std::printf("%-22s %10.1f ms  %8.3f ms/round  speedup %.2fx\n", "rounds (openmp)",
              omp_ms, omp_ms / iters, serial_ms / omp_ms);
  std::printf("%-22s %10.3g\n\n", "max |serial - openmp|", diff);

  std::vector<FeasibleSet> sets;
  for (const auto& pev : s.fleet) sets.push_back(build_feasible_set(pev, s.grid));
  Mat point = Mat::Constant(v, t, 1.0);
  auto start = Clock::now();
  Mat a = project_joint(sets, s.p_max_kw, point, {}, Execution::Serial);
  double proj_serial = ms_since(start);
  start = Clock::now();
  Mat b = project_joint(sets, s.p_max_kw, point, {}, Execution::OpenMp);
  double proj_omp = ms_since(start);
  std::printf("%-22s %10.1f ms\n", "joint proj (serial)", proj_serial);
  std::printf("%-22s %10.1f ms  speedup %.2fx\n", "joint proj (openmp)", proj_omp,
              proj_serial / proj_omp);
  std::printf("%-22s %10.3g\n", "max |serial - openmp|", (a - b).cwiseAbs().maxCoeff());

  if (diff != 0.0) {
    std::cerr << "warning: serial and OpenMP rounds disagree\n";
    return 1;
  }
  return 0;
}
