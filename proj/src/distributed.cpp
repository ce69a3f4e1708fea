#include "pevccp/distributed.hpp"

#include "pevccp/errors.hpp"
#include "pevccp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <string>
#include <vector>

namespace pevccp {

double TuningSchedule::value_at(int k) const {
  return r / std::pow(static_cast<double>(k), o);
}

ScheduleSet ScheduleSet::defaults() {
  return ScheduleSet{
      {10.0222, 0.1600},  // alpha: innovation
      {0.1080, 0.0001},   // beta: consensus
      {0.0080, 0.0320},   // delta: share tracking
      {0.0192, 0.0010},   // eta: price sensitivity
  };
}

Vec lambda_update(const AgentState& state, const std::vector<NeighborMessage>& neighbors,
                  int k, int v_total, const Vec& c2, int graph_degree) {
  if (v_total > 1 && graph_degree == 0) {
    throw ProtocolError("agent " + std::to_string(state.agent_id) +
                        " has no neighbors in a multi-agent run (graph must be connected)");
  }
  const double alpha_k = state.schedules.alpha.value_at(k);
  const double beta_k = state.schedules.beta.value_at(k);

  Vec next = state.lambda;
  // Consensus over whatever arrived this round; a fully dropped neighborhood
  // simply contributes nothing.
  for (const auto& msg : neighbors) next -= beta_k * (state.lambda - msg.lambda);
  next -= alpha_k * (state.l_est / static_cast<double>(v_total) - state.x);
  return project_halfline_floor(next, c2);
}

Vec l_update(const Vec& lambda_next, double c1, const Vec& c2, const Vec& p_max) {
  return project_halfline_cap((lambda_next - c2) / (2.0 * c1), p_max);
}

Vec x_update(const AgentState& state, int k, int v_total, const ProjectionOptions& opts) {
  const double delta_k = state.schedules.delta.value_at(k);
  const double eta_k = state.schedules.eta.value_at(k);
  Vec point = state.x +
              delta_k * (state.l_est / static_cast<double>(v_total) - state.x) -
              eta_k * state.lambda;
  return project_box_polytope(state.feasible_set, point, opts);
}

namespace {

// Canonical little-endian byte dump of the run configuration, hashed into the
// trace fingerprint.
void put_double(std::string& buf, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_vec(std::string& buf, const Vec& v) {
  put_u64(buf, static_cast<uint64_t>(v.size()));
  for (int i = 0; i < v.size(); ++i) put_double(buf, v(i));
}

uint64_t fingerprint(const Scenario& s, const ScheduleSet& sched, const Graph& graph,
                     const RunOptions& opts) {
  std::string buf;
  put_u64(buf, static_cast<uint64_t>(s.grid.horizon_steps));
  put_double(buf, s.grid.step_hours);
  put_double(buf, s.tariff.c1);
  put_vec(buf, s.tariff.c2);
  put_vec(buf, s.p_max_kw);
  put_vec(buf, s.baseline_load_kw);
  for (const auto& pev : s.fleet) {
    put_double(buf, pev.battery_capacity_kwh);
    put_double(buf, pev.charge_efficiency);
    put_double(buf, pev.initial_energy_kwh);
    put_double(buf, pev.min_soc);
    put_double(buf, pev.max_charge_kw);
    for (uint8_t a : pev.availability) buf.push_back(static_cast<char>(a));
    put_vec(buf, pev.consumption_kwh);
  }
  for (const auto& ts : {sched.alpha, sched.beta, sched.delta, sched.eta}) {
    put_double(buf, ts.r);
    put_double(buf, ts.o);
  }
  put_u64(buf, static_cast<uint64_t>(graph.node_count));
  for (const auto& [a, b] : graph.edges) {
    put_u64(buf, static_cast<uint64_t>(a));
    put_u64(buf, static_cast<uint64_t>(b));
  }
  put_u64(buf, opts.run_seed);
  if (opts.faults) {
    put_double(buf, opts.faults->drop_probability);
    put_u64(buf, opts.faults->rng_seed);
    put_u64(buf, opts.faults->halt_at_iteration ? *opts.faults->halt_at_iteration : 0);
  }
  return fnv1a64(buf.data(), buf.size());
}

double max_disagreement(const std::vector<AgentState>& agents) {
  if (agents.size() < 2) return 0.0;
  const int t_len = static_cast<int>(agents[0].lambda.size());
  double worst = 0.0;
  for (int t = 0; t < t_len; ++t) {
    double lo = agents[0].lambda(t), hi = lo;
    for (const auto& a : agents) {
      lo = std::min(lo, a.lambda(t));
      hi = std::max(hi, a.lambda(t));
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

}  // namespace

RunTrace run_distributed(const Scenario& s, const Graph& graph,
                         const ScheduleSet& schedules, const RunOptions& opts) {
  const int v_len = s.vehicle_count();
  const int t_len = s.grid.horizon_steps;
  if (graph.node_count != v_len)
    throw ProtocolError("run_distributed: graph has " + std::to_string(graph.node_count) +
                        " nodes for " + std::to_string(v_len) + " PEVs");
  if (!graph.connected())
    throw ProtocolError("run_distributed: communication graph is not connected");
  if (opts.iters < 1) throw Error("run_distributed: iters must be >= 1");
  if (opts.record_every < 1) throw Error("run_distributed: record_every must be >= 1");
  for (const auto& ts : {schedules.alpha, schedules.beta, schedules.delta, schedules.eta})
    if (!(ts.r > 0.0) || ts.o < 0.0)
      throw Error("run_distributed: schedules need r > 0 and o >= 0");

  const double c1 = s.tariff.c1;
  const Vec& c2 = s.tariff.c2;

  std::vector<AgentState> agents(v_len);
  for (int v = 0; v < v_len; ++v) {
    AgentState& a = agents[v];
    a.agent_id = v;
    a.feasible_set = build_feasible_set(s.fleet[v], s.grid);
    a.schedules = schedules;
    if (opts.warm_start) {
      a.x = opts.warm_start->x.row(v).transpose();
      a.l_est = opts.warm_start->l_est.row(v).transpose();
      a.lambda = opts.warm_start->lambda.row(v).transpose();
    } else {
      a.x = Vec::Zero(t_len);
      a.l_est = Vec::Zero(t_len);
      a.lambda = Vec::Zero(t_len);
    }
  }

  int last_round = opts.iters;
  if (opts.faults && opts.faults->halt_at_iteration)
    last_round = std::min(last_round, *opts.faults->halt_at_iteration);

  RunTrace trace;
  trace.config_fingerprint = fingerprint(s, schedules, graph, opts);
  const FaultPlan* faults = opts.faults ? &*opts.faults : nullptr;

  std::vector<Vec> outbound(v_len);
  for (int k = 1; k <= last_round; ++k) {
    for (int v = 0; v < v_len; ++v) outbound[v] = agents[v].lambda;
    auto inbox = exchange(graph, outbound, faults, k);

    std::exception_ptr failure;
    auto advance = [&](int v) {
      AgentState& a = agents[v];
      Vec lam_next = lambda_update(a, inbox[v], k, v_len, c2, graph.degree(v));
      Vec l_next = l_update(lam_next, c1, c2, s.p_max_kw);
      if (!opts.stale_updates) a.lambda = std::move(lam_next);
      Vec x_next = x_update(a, k, v_len, opts.projection);
      if (opts.stale_updates) a.lambda = std::move(lam_next);
      a.l_est = std::move(l_next);
      a.x = std::move(x_next);
    };
    if (opts.exec == Execution::OpenMp) {
#pragma omp parallel for schedule(dynamic)
      for (int v = 0; v < v_len; ++v) {
        try {
          advance(v);
        } catch (...) {
#pragma omp critical
          if (!failure) failure = std::current_exception();
        }
      }
    } else {
      for (int v = 0; v < v_len; ++v) advance(v);
    }
    if (failure) std::rethrow_exception(failure);

    if (k % opts.record_every == 0 || k == last_round) {
      TraceEntry e;
      e.k = k;
      e.agg_load_kw = Vec::Zero(t_len);
      for (const auto& a : agents) e.agg_load_kw += a.x;
      e.objective = c1 * e.agg_load_kw.squaredNorm() + c2.dot(e.agg_load_kw);
      e.rel_obj = opts.oracle_objective
                      ? rel_obj(e.objective, *opts.oracle_objective)
                      : std::numeric_limits<double>::quiet_NaN();
      e.max_disagreement = max_disagreement(agents);
      e.cap_violation = cap_violation(e.agg_load_kw, s.p_max_kw);
      double feas = 0.0;
      for (const auto& a : agents)
        feas = std::max(feas, a.feasible_set.polytope_violation(a.x));
      e.feas_residual = feas;
      trace.entries.push_back(std::move(e));
    }
    if (opts.observer) opts.observer(k, agents);
  }

  trace.final_x = Mat::Zero(v_len, t_len);
  for (int v = 0; v < v_len; ++v) trace.final_x.row(v) = agents[v].x.transpose();
  return trace;
}

}  // namespace pevccp
