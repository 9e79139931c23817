#pragma once

#include <vector>

namespace lrpx {

// Dinic max-flow on a dense-capacity directed graph with real capacities.
// Capacities below 1e-12 are treated as absent when building level graphs.
class FlowNetwork {
 public:
  explicit FlowNetwork(int n_nodes);

  void add_edge(int u, int v, double capacity);
  // Computes the max flow from s to t; mutates residual capacities, so run
  // once per network (rebuild for another query).
  double max_flow(int s, int t);

  int node_count() const { return static_cast<int>(adj_.size()); }

 private:
  struct Edge {
    int to;
    double cap;
    int rev;  // index of the reverse edge in adj_[to]
  };

  bool bfs(int s, int t);
  double dfs(int u, int t, double pushed);

  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

}  // namespace lrpx
