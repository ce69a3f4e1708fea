#include "pevccp/netsim.hpp"

#include "pevccp/errors.hpp"
#include "pevccp/rng.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace pevccp {

namespace {

Graph from_edges(int v, std::vector<std::pair<int, int>> edges) {
  Graph g;
  g.node_count = v;
  for (auto& [a, b] : edges)
    if (a > b) std::swap(a, b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  g.neighbors.assign(v, {});
  for (const auto& [a, b] : g.edges) {
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  }
  for (auto& list : g.neighbors) std::sort(list.begin(), list.end());
  return g;
}

}  // namespace

bool Graph::connected() const {
  if (node_count <= 1) return true;
  std::vector<char> seen(node_count, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : neighbors[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == node_count;
}

Graph make_topology(TopologyKind kind, int v, uint64_t seed) {
  if (v < 1) throw ProtocolError("make_topology: need at least one node");
  std::vector<std::pair<int, int>> edges;
  switch (kind) {
    case TopologyKind::Ring:
      // v == 1 has no edges, v == 2 degrades to a single link.
      for (int i = 0; i + 1 < v; ++i) edges.emplace_back(i, i + 1);
      if (v >= 3) edges.emplace_back(v - 1, 0);
      break;
    case TopologyKind::Star:
      for (int i = 1; i < v; ++i) edges.emplace_back(0, i);
      break;
    case TopologyKind::Complete:
      for (int i = 0; i < v; ++i)
        for (int j = i + 1; j < v; ++j) edges.emplace_back(i, j);
      break;
    case TopologyKind::RandomConnected: {
      Rng rng(mix64(seed, 0x70b0ULL));
      // Random spanning tree (each node attaches to a random earlier node),
      // then a few extra shortcut edges.
      std::vector<int> order(v);
      std::iota(order.begin(), order.end(), 0);
      for (int i = v - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
      for (int i = 1; i < v; ++i) edges.emplace_back(order[i], order[rng.uniform_int(0, i - 1)]);
      int extras = v / 3;
      for (int e = 0; e < extras; ++e) {
        int a = rng.uniform_int(0, v - 1);
        int b = rng.uniform_int(0, v - 1);
        if (a != b) edges.emplace_back(a, b);
      }
      break;
    }
  }
  return from_edges(v, std::move(edges));
}

bool FaultPlan::edge_dropped(int round, int edge_index) const {
  double p = std::clamp(drop_probability, 0.0, 0.999);
  if (p <= 0.0) return false;
  uint64_t h = mix64(rng_seed, static_cast<uint64_t>(round),
                     static_cast<uint64_t>(edge_index));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < p;
}

std::vector<std::vector<NeighborMessage>> exchange(const Graph& graph,
                                                   const std::vector<Vec>& outbound,
                                                   const FaultPlan* faults, int round) {
  if (static_cast<int>(outbound.size()) != graph.node_count)
    throw ProtocolError("exchange: one outbound vector per node required");

  std::vector<std::vector<NeighborMessage>> inbox(graph.node_count);
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    if (faults && faults->edge_dropped(round, static_cast<int>(e))) continue;
    const auto& [a, b] = graph.edges[e];
    inbox[a].push_back({b, outbound[b]});
    inbox[b].push_back({a, outbound[a]});
  }
  return inbox;
}

}  // namespace pevccp
