#include "pevccp/distributed.hpp"
#include "pevccp/errors.hpp"
#include "pevccp/io.hpp"
#include "pevccp/metrics.hpp"
#include "pevccp/model.hpp"
#include "pevccp/netsim.hpp"
#include "pevccp/oracle.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace pevccp;

// Exit codes: 0 ok, 2 file/parse, 3 validation/infeasible, 4 non-convergence,
// 5 protocol/topology, 1 anything else.
enum ExitCode { kOk = 0, kOther = 1, kParse = 2, kInvalid = 3, kNoConverge = 4, kProtocol = 5 };

ScenarioProfile profile_by_name(const std::string& name) {
  if (name == "paperlike") return ScenarioProfile::paperlike();
  if (name == "flat") return ScenarioProfile::flat();
  if (name == "commuter") {
    ScenarioProfile p = ScenarioProfile::paperlike();
    p.availability = AvailabilityPattern::Commuter;
    return p;
  }
  if (name == "random") {
    ScenarioProfile p = ScenarioProfile::paperlike();
    p.availability = AvailabilityPattern::RandomWindows;
    return p;
  }
  throw ValidationError("unknown profile '" + name + "'");
}

Graph topology_from_spec(const std::string& spec, int v, uint64_t seed) {
  if (spec == "ring") return make_topology(TopologyKind::Ring, v, seed);
  if (spec == "star") return make_topology(TopologyKind::Star, v, seed);
  if (spec == "complete") return make_topology(TopologyKind::Complete, v, seed);
  if (spec.rfind("random", 0) == 0) {
    uint64_t s = seed;
    auto colon = spec.find(':');
    if (colon != std::string::npos) s = std::stoull(spec.substr(colon + 1));
    return make_topology(TopologyKind::RandomConnected, v, s);
  }
  throw ProtocolError("unknown topology '" + spec + "'");
}

ScheduleSet apply_schedule_overrides(ScheduleSet base,
                                     const std::vector<std::string>& entries) {
  for (const auto& entry : entries) {
    auto eq = entry.find('=');
    auto comma = entry.find(',', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || comma == std::string::npos)
      throw ParseError("--schedules expects name=r,o got '" + entry + "'");
    std::string name = entry.substr(0, eq);
    TuningSchedule ts{std::stod(entry.substr(eq + 1, comma - eq - 1)),
                      std::stod(entry.substr(comma + 1))};
    if (name == "alpha") base.alpha = ts;
    else if (name == "beta") base.beta = ts;
    else if (name == "delta") base.delta = ts;
    else if (name == "eta") base.eta = ts;
    else throw ParseError("--schedules: unknown schedule '" + name + "'");
  }
  return base;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_compare_outputs(const Scenario& s, const RunTrace& trace,
                           const CentralSolution& central, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int t_len = s.grid.horizon_steps;

  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(out_dir) / name);
    if (!f) throw ParseError("cannot write " + name + " under " + out_dir);
    return f;
  };

  // rel_obj against the centralized optimum, per recorded iteration.
  {
    auto f = open("relobj_vs_iteration.csv");
    f << "k,rel_obj\n";
    for (const auto& e : trace.entries) {
      double r = std::isnan(e.rel_obj) ? rel_obj(e.objective, central.objective) : e.rel_obj;
      f << e.k << ',' << fmt17(r) << '\n';
    }
  }

  const Vec final_agg = trace.entries.empty()
                            ? Vec(trace.final_x.colwise().sum().transpose())
                            : trace.entries.back().agg_load_kw;

  // Final aggregate demand across the horizon, with the cap.
  {
    auto f = open("aggregate_demand.csv");
    f << "t,hour,agg_kw,central_kw,p_max_kw\n";
    for (int t = 0; t < t_len; ++t) {
      f << t << ',' << fmt17((t + 0.5) * s.grid.step_hours) << ',' << fmt17(final_agg(t))
        << ',' << fmt17(central.l_agg(t)) << ',' << fmt17(s.p_max_kw(t)) << '\n';
    }
  }

  // Per-step aggregate over the iterations (one row per recorded iteration).
  {
    auto f = open("load_vs_iteration.csv");
    f << "k";
    for (int t = 0; t < t_len; ++t) f << ",agg_kw_" << t;
    f << '\n';
    for (const auto& e : trace.entries) {
      f << e.k;
      for (int t = 0; t < t_len; ++t) f << ',' << fmt17(e.agg_load_kw(t));
      f << '\n';
    }
  }

  Vec uncontrolled = uncontrolled_aggregate(s);
  ValleyReport valley = valley_filling_report(s.baseline_load_kw, final_agg, uncontrolled);

  // Baseline vs total loads (coordinated and uncontrolled).
  {
    auto f = open("total_load.csv");
    f << "t,hour,baseline_kw,total_coordinated_kw,total_uncontrolled_kw\n";
    for (int t = 0; t < t_len; ++t) {
      f << t << ',' << fmt17((t + 0.5) * s.grid.step_hours) << ','
        << fmt17(s.baseline_load_kw(t)) << ',' << fmt17(valley.total_load_kw(t)) << ','
        << fmt17(valley.uncontrolled_total_kw(t)) << '\n';
    }
  }

  double final_rel = trace.entries.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : (std::isnan(trace.entries.back().rel_obj)
                                ? rel_obj(trace.entries.back().objective, central.objective)
                                : trace.entries.back().rel_obj);
  double max_gap = (final_agg - central.l_agg).cwiseAbs().maxCoeff();

  {
    auto f = open("summary.json");
    f << "{\n"
      << "  \"final_rel_obj\": " << fmt17(final_rel) << ",\n"
      << "  \"final_load_max_gap_kw\": " << fmt17(max_gap) << ",\n"
      << "  \"final_cap_violation_kw\": " << fmt17(cap_violation(final_agg, s.p_max_kw))
      << ",\n"
      << "  \"valley\": {\n"
      << "    \"variance\": " << fmt17(valley.variance) << ",\n"
      << "    \"peak_kw\": " << fmt17(valley.peak) << ",\n"
      << "    \"uncontrolled_variance\": " << fmt17(valley.uncontrolled_variance) << ",\n"
      << "    \"variance_reduction\": " << fmt17(valley.variance_reduction) << "\n"
      << "  }\n"
      << "}\n";
  }
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Cooperative PEV charging: scenario generator, centralized reference "
               "solver, distributed consensus engine, and comparison reports"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a synthetic scenario file");
  uint64_t gen_seed = 1;
  int gen_v = 20, gen_t = 96;
  std::string gen_profile = "paperlike", gen_out = "scenario.json";
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--v", gen_v, "fleet size");
  gen->add_option("--t", gen_t, "time steps");
  gen->add_option("--profile", gen_profile, "paperlike|flat|commuter|random");
  gen->add_option("--out", gen_out, "output path")->required();

  // --- solve-central -------------------------------------------------------
  auto* solve = app.add_subcommand("solve-central", "run the centralized reference solver");
  std::string solve_scenario, solve_out = "central.json";
  double solve_tol = 1e-8;
  solve->add_option("--scenario", solve_scenario, "scenario file")->required();
  solve->add_option("--tol", solve_tol, "convergence tolerance");
  solve->add_option("--out", solve_out, "output path")->required();

  // --- run -----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run the distributed algorithm");
  std::string run_scenario, run_out = "trace.json", run_topology, run_oracle;
  int run_iters = 1000, run_record = 1;
  uint64_t run_seed = 0;
  double run_drop = 0.0;
  int run_halt = 0;
  bool run_stale = false, run_parallel = false;
  std::vector<std::string> run_schedules;
  run->add_option("--scenario", run_scenario, "scenario file")->required();
  run->add_option("--topology", run_topology, "ring|star|complete|random:seed");
  run->add_option("--iters", run_iters, "number of rounds");
  run->add_option("--record-every", run_record, "trace recording stride");
  run->add_option("--seed", run_seed, "run seed (topology and faults)");
  run->add_option("--out", run_out, "trace output path (.csv or .json)")->required();
  run->add_option("--schedules", run_schedules, "override gains, name=r,o")->expected(-1);
  run->add_option("--drop-prob", run_drop, "per-edge message drop probability");
  run->add_option("--halt-at", run_halt, "stop after this round (0 = off)");
  run->add_option("--oracle-solution", run_oracle, "central solution for inline rel_obj");
  run->add_flag("--stale-updates", run_stale, "all updates read round-entry values");
  run->add_flag("--parallel", run_parallel, "OpenMP per-agent execution");

  // --- compare ---------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "compare a trace against the central solution");
  std::string cmp_scenario, cmp_trace, cmp_central, cmp_out = "compare";
  cmp->add_option("--scenario", cmp_scenario, "scenario file")->required();
  cmp->add_option("--trace", cmp_trace, "trace file (.json)")->required();
  cmp->add_option("--central", cmp_central, "central solution file")->required();
  cmp->add_option("--out", cmp_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    Scenario s = generate_scenario(gen_seed, gen_v, gen_t, profile_by_name(gen_profile));
    write_scenario(s, gen_out);
    std::cout << "wrote " << gen_out << " (V=" << gen_v << ", T=" << gen_t << ")\n";
    return kOk;
  }

  if (solve->parsed()) {
    Scenario s = read_scenario(solve_scenario);
    CentralSolution sol = solve_central(s, solve_tol);
    write_central_solution(sol, solve_out);
    std::cout << "objective " << fmt17(sol.objective) << ", kkt residual "
              << fmt17(sol.kkt.worst()) << ", wrote " << solve_out << "\n";
    return kOk;
  }

  if (run->parsed()) {
    ScenarioDocument doc = read_scenario_document(run_scenario);
    const Scenario& s = doc.scenario;
    std::string topo = !run_topology.empty() ? run_topology
                       : doc.topology ? *doc.topology
                                      : "ring";
    Graph graph = topology_from_spec(topo, s.vehicle_count(), run_seed);
    ScheduleSet sched = doc.schedules ? *doc.schedules : ScheduleSet::defaults();
    sched = apply_schedule_overrides(sched, run_schedules);

    RunOptions opts;
    opts.iters = run_iters;
    opts.record_every = run_record;
    opts.stale_updates = run_stale;
    opts.exec = run_parallel ? Execution::OpenMp : Execution::Serial;
    opts.run_seed = run_seed;
    if (run_drop > 0.0 || run_halt > 0) {
      FaultPlan plan;
      plan.drop_probability = run_drop;
      if (run_halt > 0) plan.halt_at_iteration = run_halt;
      plan.rng_seed = run_seed;
      opts.faults = plan;
    }
    if (!run_oracle.empty())
      opts.oracle_objective = read_central_solution(run_oracle).objective;

    RunTrace trace = run_distributed(s, graph, sched, opts);
    bool csv = run_out.size() > 4 && run_out.substr(run_out.size() - 4) == ".csv";
    write_trace(trace, run_out, csv ? TraceFormat::Csv : TraceFormat::Json);
    const TraceEntry& last = trace.entries.back();
    std::cout << "ran " << last.k << " rounds, objective " << fmt17(last.objective)
              << ", cap violation " << fmt17(last.cap_violation) << ", wrote " << run_out
              << "\n";
    return kOk;
  }

  if (cmp->parsed()) {
    Scenario s = read_scenario(cmp_scenario);
    RunTrace trace = read_trace_json(cmp_trace);
    CentralSolution central = read_central_solution(cmp_central);
    write_compare_outputs(s, trace, central, cmp_out);
    std::cout << "wrote comparison files under " << cmp_out << "\n";
    return kOk;
  }

  return kOther;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const pevccp::ParseError& e) {
    std::cerr << "error kind=parse msg=\"" << e.what() << "\"\n";
    return kParse;
  } catch (const pevccp::InfeasiblePevError& e) {
    std::cerr << "error kind=infeasible msg=\"" << e.what() << "\"\n";
    return kInvalid;
  } catch (const pevccp::InfeasibleScenarioError& e) {
    std::cerr << "error kind=infeasible msg=\"" << e.what() << "\"\n";
    return kInvalid;
  } catch (const pevccp::ValidationError& e) {
    std::cerr << "error kind=validation msg=\"" << e.what() << "\"\n";
    return kInvalid;
  } catch (const pevccp::ConvergenceError& e) {
    std::cerr << "error kind=no-convergence msg=\"" << e.what() << "\"\n";
    return kNoConverge;
  } catch (const pevccp::ProjectionError& e) {
    std::cerr << "error kind=no-convergence msg=\"" << e.what() << "\"\n";
    return kNoConverge;
  } catch (const pevccp::ProtocolError& e) {
    std::cerr << "error kind=protocol msg=\"" << e.what() << "\"\n";
    return kProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal msg=\"" << e.what() << "\"\n";
    return kOther;
  }
}
