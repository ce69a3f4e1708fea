#pragma once

#include "pevccp/model.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace pevccp {

enum class TopologyKind { Ring, Star, Complete, RandomConnected };

/// Undirected communication graph without self-loops.
struct Graph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;     // canonical (lo, hi) pairs
  std::vector<std::vector<int>> neighbors;    // adjacency lists

  bool connected() const;
  int degree(int v) const { return static_cast<int>(neighbors[v].size()); }
};

/// Builds a connected graph of the requested kind. RandomConnected draws a
/// random spanning tree plus extra edges, deterministic in seed.
Graph make_topology(TopologyKind kind, int v, uint64_t seed = 0);

/// Edge-level fault model: each round, every edge independently drops with
/// drop_probability (both directions at once). Draws are a pure function of
/// (rng_seed, round, edge), so runs are deterministic and order-independent.
struct FaultPlan {
  double drop_probability = 0.0;          // clamped to [0, 0.999]
  std::optional<int> halt_at_iteration{}; // stop the run after this round
  uint64_t rng_seed = 0;

  bool edge_dropped(int round, int edge_index) const;
};

/// What one agent hears from a neighbor in a round: the price iterate only.
struct NeighborMessage {
  int sender = -1;
  Vec lambda;
};

/// Synchronous exchange: node v receives the round's lambda from each
/// non-dropped neighbor. outbound holds one vector per node.
std::vector<std::vector<NeighborMessage>> exchange(const Graph& graph,
                                                   const std::vector<Vec>& outbound,
                                                   const FaultPlan* faults,
                                                   int round);

}  // namespace pevccp
