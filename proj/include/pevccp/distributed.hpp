#pragma once

#include "pevccp/feasibility.hpp"
#include "pevccp/metrics.hpp"
#include "pevccp/model.hpp"
#include "pevccp/netsim.hpp"
#include "pevccp/oracle.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pevccp {

/// Diminishing gain r / k^o, k >= 1.
struct TuningSchedule {
  double r = 0.0;  // > 0
  double o = 0.0;  // >= 0

  double value_at(int k) const;
};

/// The four gains of the agent updates.
struct ScheduleSet {
  TuningSchedule alpha;  // innovation gain (price update)
  TuningSchedule beta;   // consensus gain (price update)
  TuningSchedule delta;  // share-tracking gain (schedule update)
  TuningSchedule eta;    // price-sensitivity gain (schedule update)

  /// Reference gains used by the stock experiment configuration.
  static ScheduleSet defaults();
};

/// Everything one agent owns between rounds.
struct AgentState {
  int agent_id = -1;
  Vec x;        // own charging schedule, in feasible_set at every iteration
  Vec l_est;    // local estimate of the fleet aggregate, <= p_max elementwise
  Vec lambda;   // price iterate, >= c2 elementwise
  FeasibleSet feasible_set;
  ScheduleSet schedules;
};

/// Price update: consensus step over received neighbor prices plus the local
/// innovation (estimated share minus own schedule), floored at c2.
/// graph_degree is the agent's neighbor count in the graph; an agent with no
/// graph neighbors in a multi-agent run is a protocol error (messages may
/// still be empty in a round when every incident edge dropped).
Vec lambda_update(const AgentState& state, const std::vector<NeighborMessage>& neighbors,
                  int k, int v_total, const Vec& c2, int graph_degree);

/// Aggregate-load estimate from the refreshed price, capped at p_max:
/// min((lambda - c2) / (2 c1), p_max). Nonnegative whenever lambda >= c2.
Vec l_update(const Vec& lambda_next, double c1, const Vec& c2, const Vec& p_max);

/// Schedule update: step toward the estimated share, descend along the price,
/// then project back onto the agent's feasible set. Reads state.lambda (the
/// engine refreshes it first) and state.l_est (still the round-entry value).
Vec x_update(const AgentState& state, int k, int v_total,
             const ProjectionOptions& opts = {});

/// Warm start: initial iterates for every agent (cold start is all zeros).
struct WarmStart {
  Mat x;       // V x T
  Mat l_est;   // V x T
  Mat lambda;  // V x T
};

struct RunOptions {
  int iters = 1000;
  int record_every = 1;
  std::optional<double> oracle_objective{};  // enables inline rel_obj
  std::optional<FaultPlan> faults{};
  std::optional<WarmStart> warm_start{};
  bool stale_updates = false;  // all three updates read round-entry values
  Execution exec = Execution::Serial;
  ProjectionOptions projection{};
  uint64_t run_seed = 0;  // folded into the trace fingerprint
  /// Test hook, called after every round with the committed states.
  std::function<void(int k, const std::vector<AgentState>&)> observer{};
};

/// Synchronous-round engine: exchange prices, then let every agent refresh
/// lambda, its aggregate estimate, and its schedule. Agents are independent
/// within a round, so the per-agent loop runs serial or OpenMP-parallel with
/// identical results. Throws ProtocolError on a disconnected graph.
RunTrace run_distributed(const Scenario& s, const Graph& graph,
                         const ScheduleSet& schedules, const RunOptions& opts);

}  // namespace pevccp
