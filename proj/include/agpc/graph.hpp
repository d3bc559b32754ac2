#pragma once

#include "agpc/core.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace agpc {

// ===========================================================================
// Undirected graphs, pair-indexed weights, and switching topologies
// ===========================================================================

/// Number of unordered node pairs {i, k} with i < k in an n-node graph.
[[nodiscard]] constexpr int pair_count(int n) { return n * (n - 1) / 2; }

/// Position of the unordered pair {i, k} (0-based nodes, i != k) in
/// lexicographic order: (0,1), (0,2), ..., (0,n-1), (1,2), ...
[[nodiscard]] constexpr int pair_index(int n, int i, int k) {
  if (i > k) {
    const int tmp = i;
    i = k;
    k = tmp;
  }
  return i * n - i * (i + 1) / 2 + (k - i - 1);
}

/// Simple undirected graph on nodes 0..n-1 with a normalized edge list
/// (each edge stored once as (i, k) with i < k, sorted lexicographically).
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;

  Graph() = default;

  Graph(int node_count, std::vector<std::pair<int, int>> edge_list) : n(node_count) {
    require(n >= 1, "graph must have at least one node");
    edges.reserve(edge_list.size());
    for (auto [i, k] : edge_list) {
      require(i != k, "self-loops are not allowed");
      require(i >= 0 && i < n && k >= 0 && k < n, "edge endpoint out of range");
      edges.emplace_back(std::min(i, k), std::max(i, k));
    }
    std::sort(edges.begin(), edges.end());
    require(std::adjacent_find(edges.begin(), edges.end()) == edges.end(),
            "duplicate edge");
  }

  [[nodiscard]] bool has_edge(int i, int k) const {
    if (i == k) return false;
    const std::pair<int, int> e{std::min(i, k), std::max(i, k)};
    return std::binary_search(edges.begin(), edges.end(), e);
  }

  [[nodiscard]] int degree(int i) const {
    int deg = 0;
    for (auto [a, b] : edges) deg += (a == i) + (b == i);
    return deg;
  }
};

/// One adaptive coupling weight per unordered node pair; non-edge ("virtual")
/// pairs carry weights too, so the state survives topology switches.
struct WeightState {
  int n = 0;
  Vector w;

  WeightState() = default;
  explicit WeightState(int node_count, double initial = 1.0)
      : n(node_count), w(Vector::Constant(pair_count(node_count), initial)) {}

  [[nodiscard]] double at(int i, int k) const { return w[pair_index(n, i, k)]; }
  [[nodiscard]] double& at(int i, int k) { return w[pair_index(n, i, k)]; }
};

[[nodiscard]] inline bool is_connected(const Graph& g) {
  if (g.n <= 1) return g.n == 1;
  std::vector<std::vector<int>> adj(g.n);
  for (auto [i, k] : g.edges) {
    adj[i].push_back(k);
    adj[k].push_back(i);
  }
  std::vector<char> seen(g.n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (const int u : adj[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++visited;
        stack.push_back(u);
      }
    }
  }
  return visited == g.n;
}

/// Laplacian with unit weight on every edge.
[[nodiscard]] inline Matrix laplacian_01(const Graph& g) {
  Matrix l = Matrix::Zero(g.n, g.n);
  for (auto [i, k] : g.edges) {
    l(i, i) += 1.0;
    l(k, k) += 1.0;
    l(i, k) -= 1.0;
    l(k, i) -= 1.0;
  }
  return l;
}

/// Laplacian with the pair weights on the graph's edges; weights of
/// non-edge pairs are ignored.
[[nodiscard]] inline Matrix weighted_laplacian(const Graph& g, const WeightState& weights) {
  require(weights.n == g.n, "weight state node count mismatch");
  Matrix l = Matrix::Zero(g.n, g.n);
  for (auto [i, k] : g.edges) {
    const double w = weights.at(i, k);
    l(i, i) += w;
    l(k, k) += w;
    l(i, k) -= w;
    l(k, i) -= w;
  }
  return l;
}

/// Ascending eigenvalues of a symmetric matrix (intended for Laplacians).
[[nodiscard]] inline Vector laplacian_spectrum(const Matrix& l) {
  require(is_symmetric(l, 1e-12), "matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(l), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// The projection I - (1/n) * ones * onesT: the Laplacian of the complete
/// graph with edge weights 1/n. Annihilates the consensus direction.
[[nodiscard]] inline Matrix complete_projection(int n) {
  require(n >= 2, "projection needs at least two nodes");
  return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
}

/// A finite family of connected graphs on a common node set, plus the
/// minimum dwell time between switches.
struct SwitchingSet {
  std::vector<Graph> graphs;
  double dwell = 0.0;

  SwitchingSet() = default;

  SwitchingSet(std::vector<Graph> graph_list, double dwell_time)
      : graphs(std::move(graph_list)), dwell(dwell_time) {
    require(!graphs.empty(), "switching set must contain at least one graph");
    require(dwell > 0.0, "dwell time must be positive");
    for (const Graph& g : graphs) {
      require(g.n == graphs.front().n, "all graphs must share the node count");
      require(is_connected(g), "all graphs in the switching set must be connected");
    }
  }

  [[nodiscard]] int nodes() const { return graphs.empty() ? 0 : graphs.front().n; }
};

/// Piecewise-constant graph selection. Segment m is active on
/// [breakpoints[m], breakpoints[m+1]); the switch instant belongs to the
/// NEW graph (right-continuous), matching the weight-reset convention.
struct SwitchingSchedule {
  std::vector<double> breakpoints;  // ascending, breakpoints[0] == 0
  std::vector<int> indices;         // graph index per segment

  [[nodiscard]] int segments() const { return static_cast<int>(indices.size()); }

  [[nodiscard]] int segment_at(double t) const {
    require(!breakpoints.empty(), "empty schedule");
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    const auto seg = static_cast<int>(it - breakpoints.begin()) - 1;
    return std::clamp(seg, 0, segments() - 1);
  }

  [[nodiscard]] int index_at(double t) const { return indices[segment_at(t)]; }
};

/// Deterministic uniform schedule: breakpoints at multiples of `interval`
/// below `horizon`, graph indices drawn from a seeded generator.
[[nodiscard]] inline SwitchingSchedule sample_switching_signal(const SwitchingSet& set,
                                                               double horizon,
                                                               double interval,
                                                               std::uint64_t seed) {
  require(horizon > 0.0, "horizon must be positive");
  require(interval > 0.0, "switch interval must be positive");
  require(interval >= set.dwell, "switch interval below the set's dwell time");
  require(!set.graphs.empty(), "switching set must contain at least one graph");
  std::mt19937_64 rng(seed);
  const auto count = static_cast<std::uint64_t>(set.graphs.size());
  SwitchingSchedule schedule;
  for (int m = 0;; ++m) {
    const double t = m * interval;
    if (t >= horizon - 1e-12) break;
    schedule.breakpoints.push_back(t);
    schedule.indices.push_back(static_cast<int>(rng() % count));
  }
  return schedule;
}

}  // namespace agpc
