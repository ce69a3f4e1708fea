// Acceptance suite: exercises the full artifact end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include "pevccp/distributed.hpp"
#include "pevccp/errors.hpp"
#include "pevccp/io.hpp"
#include "pevccp/metrics.hpp"
#include "pevccp/model.hpp"
#include "pevccp/netsim.hpp"
#include "pevccp/oracle.hpp"
#include "pevccp/rng.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace pevccp;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;

  void criterion(int id, const std::string& name, const std::function<void()>& body) {
    try {
      body();
      std::printf("[PASS] criterion %d: %s\n", id, name.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %d: %s\n       %s\n", id, name.c_str(), e.what());
    }
    std::fflush(stdout);
  }
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::runtime_error("median of empty range");
  std::sort(v.begin(), v.end());
  size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// The stock experiment pipeline, everything through files so the
// determinism criterion can byte-compare a full re-run.
struct PipelineFiles {
  fs::path scenario, central, trace_csv, trace_json, compare_dir;
};

PipelineFiles run_pipeline(const fs::path& dir, RunTrace* trace_out = nullptr,
                           CentralSolution* central_out = nullptr,
                           Scenario* scenario_out = nullptr) {
  fs::create_directories(dir);
  PipelineFiles files{dir / "scenario.json", dir / "central.json", dir / "trace.csv",
                      dir / "trace.json", dir / "compare"};

  Scenario generated = generate_scenario(1, 20, 96, ScenarioProfile::paperlike());
  write_scenario(generated, files.scenario.string());
  Scenario s = read_scenario(files.scenario.string());

  CentralSolution central = solve_central(s, 1e-8);
  write_central_solution(central, files.central.string());

  Graph ring = make_topology(TopologyKind::Ring, s.vehicle_count());
  RunOptions opts;
  opts.iters = 1000;
  opts.record_every = 10;
  opts.oracle_objective = central.objective;
  RunTrace trace = run_distributed(s, ring, ScheduleSet::defaults(), opts);
  write_trace(trace, files.trace_csv.string(), TraceFormat::Csv);
  write_trace(trace, files.trace_json.string(), TraceFormat::Json);

  // compare stage: same outputs the CLI emits
  RunTrace reread = read_trace_json(files.trace_json.string());
  CentralSolution central_reread = read_central_solution(files.central.string());
  fs::create_directories(files.compare_dir);
  {
    std::ofstream f(files.compare_dir / "relobj_vs_iteration.csv");
    f << "k,rel_obj\n";
    char buf[64];
    for (const auto& e : reread.entries) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g\n", e.k, e.rel_obj);
      f << buf;
    }
  }

  if (trace_out) *trace_out = trace;
  if (central_out) *central_out = central;
  if (scenario_out) *scenario_out = s;
  return files;
}

}  // namespace

int main() {
  fs::path work = fs::temp_directory_path() /
                  ("pevccp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  Harness h;

  // Shared artifacts of the stock experiment.
  RunTrace trace;
  CentralSolution central;
  Scenario scenario;
  PipelineFiles files;
  bool pipeline_ok = true;
  try {
    files = run_pipeline(work / "run1", &trace, &central, &scenario);
  } catch (const std::exception& e) {
    pipeline_ok = false;
    std::printf("[FAIL] pipeline setup: %s\n", e.what());
  }

  h.criterion(1, "distributed run reaches rel_obj <= 1e-2 with a decreasing trend", [&] {
    require(pipeline_ok, "pipeline setup failed");
    double best = 1e300;
    std::vector<double> early, late;
    for (const auto& e : trace.entries) {
      best = std::min(best, e.rel_obj);
      if (e.k >= 50 && e.k <= 150) early.push_back(e.rel_obj);
      if (e.k >= 900 && e.k <= 1000) late.push_back(e.rel_obj);
    }
    double final_rel = trace.entries.back().rel_obj;
    require(best <= 1e-2, "rel_obj never fell below 1e-2");
    double m_early = median(early), m_late = median(late);
    require(m_late < m_early, "rel_obj median did not decrease (" +
                                  std::to_string(m_early) + " -> " +
                                  std::to_string(m_late) + ")");
    std::printf("       final rel_obj %.3e, medians %.3e -> %.3e\n", final_rel, m_early,
                m_late);
  });

  h.criterion(2, "final aggregate respects the cap (run 1e-3 kW, oracle 1e-7 kW)", [&] {
    require(pipeline_ok, "pipeline setup failed");
    double run_viol = trace.entries.back().cap_violation;
    double oracle_viol = cap_violation(central.l_agg, scenario.p_max_kw);
    require(run_viol <= 1e-3, "run cap violation " + std::to_string(run_viol));
    require(oracle_viol <= 1e-7, "oracle cap violation " + std::to_string(oracle_viol));
    std::printf("       run %.3e kW, oracle %.3e kW\n", run_viol, oracle_viol);
  });

  h.criterion(3, "every iterate is locally feasible, also under faults and early halt", [&] {
    require(pipeline_ok, "pipeline setup failed");
    for (const auto& e : trace.entries)
      require(e.feas_residual <= 1e-7,
              "recorded residual " + std::to_string(e.feas_residual) + " at k=" +
                  std::to_string(e.k));

    std::vector<FeasibleSet> sets;
    for (const auto& pev : scenario.fleet)
      sets.push_back(build_feasible_set(pev, scenario.grid));
    Graph ring = make_topology(TopologyKind::Ring, scenario.vehicle_count());

    auto check_run = [&](RunOptions opts, const char* label) {
      double worst_poly = 0.0, worst_box = 0.0;
      opts.observer = [&](int, const std::vector<AgentState>& agents) {
        for (size_t v = 0; v < agents.size(); ++v) {
          worst_poly = std::max(worst_poly, sets[v].polytope_violation(agents[v].x));
          worst_box = std::max(worst_box, sets[v].box_violation(agents[v].x));
        }
      };
      run_distributed(scenario, ring, ScheduleSet::defaults(), opts);
      require(worst_poly <= 1e-7, std::string(label) + ": polytope residual " +
                                      std::to_string(worst_poly));
      require(worst_box == 0.0, std::string(label) + ": box bound violated");
    };

    RunOptions faulty;
    faulty.iters = 300;
    faulty.record_every = 10;
    FaultPlan plan;
    plan.drop_probability = 0.2;
    plan.rng_seed = 2024;
    faulty.faults = plan;
    check_run(faulty, "drop 0.2");

    RunOptions halted;
    halted.iters = 300;
    halted.record_every = 10;
    FaultPlan halt;
    halt.halt_at_iteration = 100;
    halted.faults = halt;
    check_run(halted, "halt at 100");
  });

  h.criterion(4, "central solver matches active-set enumeration on 50 instances", [&] {
    Rng rng(404);
    int done = 0;
    double worst_gap = 0.0, worst_kkt = 0.0;
    while (done < 50) {
      int v = rng.uniform_int(1, 3);
      int t = rng.uniform_int(1, 4);
      if (v * t > 6) continue;  // keep the exhaustive oracle exhaustive
      Scenario s = testsupport::random_small_scenario(rng, v, t);
      testsupport::EnumSolution ref = testsupport::enumerate_central(s);
      require(ref.found, "enumeration oracle found no KKT point");
      CentralSolution sol = solve_central(s, 1e-9);
      double gap = std::abs(sol.objective - ref.objective);
      KktResidual kkt = kkt_check(s, sol, 1e-9);
      worst_gap = std::max(worst_gap, gap);
      worst_kkt = std::max(worst_kkt, kkt.worst());
      require(gap <= 1e-6, "objective gap " + std::to_string(gap));
      require(kkt.worst() <= 1e-6, "kkt residual " + std::to_string(kkt.worst()));
      ++done;
    }
    std::printf("       worst objective gap %.3e, worst kkt residual %.3e\n", worst_gap,
                worst_kkt);
  });

  h.criterion(5, "projection matches the enumeration oracle on 200 instances", [&] {
    Rng rng(505);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
      int t = rng.uniform_int(1, 3);
      Scenario s = testsupport::random_small_scenario(rng, 1, t);
      FeasibleSet f = build_feasible_set(s.fleet[0], s.grid);
      Vec y(t), y2(t);
      for (int i = 0; i < t; ++i) {
        y(i) = rng.uniform(-4.0, 8.0);
        y2(i) = rng.uniform(-4.0, 8.0);
      }
      Vec got = project_box_polytope(f, y);
      Vec ref = testsupport::enumerate_projection(f, y);
      require(ref.size() == t, "projection oracle failed");
      worst = std::max(worst, (got - ref).cwiseAbs().maxCoeff());
      require((got - ref).cwiseAbs().maxCoeff() <= 1e-6, "projection mismatch");
      require((project_box_polytope(f, got) - got).norm() <= 1e-7, "not idempotent");
      Vec got2 = project_box_polytope(f, y2);
      require((got - got2).norm() <= (y - y2).norm() + 1e-9, "expansive projection");
    }
    std::printf("       worst projection gap %.3e\n", worst);
  });

  h.criterion(6, "agents initialized at the optimum stay within 1e-6 for 100 rounds", [&] {
    Scenario s = testsupport::identical_fleet_scenario(4);
    CentralSolution sol = solve_central(s, 1e-10);
    require(cap_violation(sol.l_agg, s.p_max_kw) == 0.0, "optimum touches the cap");

    const int v = s.vehicle_count();
    WarmStart warm;
    warm.x = sol.x_all;
    warm.l_est = Mat::Zero(v, s.grid.horizon_steps);
    warm.lambda = Mat::Zero(v, s.grid.horizon_steps);
    Vec lambda_star = 2.0 * s.tariff.c1 * sol.l_agg + s.tariff.c2;
    for (int i = 0; i < v; ++i) {
      warm.l_est.row(i) = sol.l_agg.transpose();
      warm.lambda.row(i) = lambda_star.transpose();
    }
    RunOptions opts;
    opts.iters = 100;
    opts.record_every = 100;
    opts.warm_start = warm;
    double drift = 0.0;
    opts.observer = [&](int, const std::vector<AgentState>& agents) {
      for (int i = 0; i < v; ++i) {
        drift = std::max(drift, (agents[i].x - sol.x_all.row(i).transpose())
                                    .cwiseAbs()
                                    .maxCoeff());
        drift = std::max(drift, (agents[i].lambda - lambda_star).cwiseAbs().maxCoeff());
        drift = std::max(drift, (agents[i].l_est - sol.l_agg).cwiseAbs().maxCoeff());
      }
    };
    run_distributed(s, make_topology(TopologyKind::Ring, v), ScheduleSet::defaults(),
                    opts);
    require(drift <= 1e-6, "iterates drifted " + std::to_string(drift));
    std::printf("       max drift over 100 rounds %.3e\n", drift);
  });

  h.criterion(7, "coordinated charging valley-fills, and the cap limits it", [&] {
    require(pipeline_ok, "pipeline setup failed");
    Vec uncontrolled = uncontrolled_aggregate(scenario);
    Vec final_agg = trace.entries.back().agg_load_kw;
    ValleyReport report =
        valley_filling_report(scenario.baseline_load_kw, final_agg, uncontrolled);
    require(report.variance < report.uncontrolled_variance,
            "coordinated variance not below uncontrolled");
    require(trace.entries.back().cap_violation <= 1e-3,
            "coordinated schedule violates the cap");

    Scenario relaxed = scenario;
    relaxed.p_max_kw = Vec::Constant(scenario.grid.horizon_steps, 70.0);
    CentralSolution tight_sol = central;
    CentralSolution relaxed_sol = solve_central(relaxed, 1e-8);
    ValleyReport tight_r = valley_filling_report(scenario.baseline_load_kw,
                                                 tight_sol.l_agg, uncontrolled);
    ValleyReport relaxed_r = valley_filling_report(scenario.baseline_load_kw,
                                                   relaxed_sol.l_agg, uncontrolled);
    require(tight_r.variance >= relaxed_r.variance - 1e-9,
            "capped variance unexpectedly below relaxed variance");
    std::printf("       coordinated %.2f < uncontrolled %.2f; capped %.2f >= relaxed %.2f\n",
                report.variance, report.uncontrolled_variance, tight_r.variance,
                relaxed_r.variance);
  });

  h.criterion(8, "repeating the pipeline yields byte-identical files", [&] {
    require(pipeline_ok, "pipeline setup failed");
    PipelineFiles second = run_pipeline(work / "run2");
    auto same = [&](const fs::path& a, const fs::path& b) {
      require(slurp(a) == slurp(b), "files differ: " + a.filename().string());
    };
    same(files.scenario, second.scenario);
    same(files.central, second.central);
    same(files.trace_csv, second.trace_csv);
    same(files.trace_json, second.trace_json);
    same(files.compare_dir / "relobj_vs_iteration.csv",
         second.compare_dir / "relobj_vs_iteration.csv");
  });

  fs::remove_all(work);
  if (h.failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", h.failures);
  return 1;
}
