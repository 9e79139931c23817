#include "lrpx/maxflow.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace lrpx {

namespace {
constexpr double kCapEps = 1e-12;
}

FlowNetwork::FlowNetwork(int n_nodes) : adj_(n_nodes) {
  if (n_nodes <= 0) throw std::invalid_argument("FlowNetwork: need at least one node");
}

void FlowNetwork::add_edge(int u, int v, double capacity) {
  if (u < 0 || v < 0 || u >= node_count() || v >= node_count()) {
    throw std::invalid_argument("FlowNetwork: node out of range");
  }
  if (capacity < 0.0) throw std::invalid_argument("FlowNetwork: negative capacity");
  adj_[u].push_back({v, capacity, static_cast<int>(adj_[v].size())});
  adj_[v].push_back({u, 0.0, static_cast<int>(adj_[u].size()) - 1});
}

bool FlowNetwork::bfs(int s, int t) {
  level_.assign(node_count(), -1);
  std::queue<int> q;
  level_[s] = 0;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const Edge& e : adj_[u]) {
      if (e.cap > kCapEps && level_[e.to] < 0) {
        level_[e.to] = level_[u] + 1;
        q.push(e.to);
      }
    }
  }
  return level_[t] >= 0;
}

double FlowNetwork::dfs(int u, int t, double pushed) {
  if (u == t) return pushed;
  for (int& i = iter_[u]; i < static_cast<int>(adj_[u].size()); ++i) {
    Edge& e = adj_[u][i];
    if (e.cap > kCapEps && level_[e.to] == level_[u] + 1) {
      const double got = dfs(e.to, t, std::min(pushed, e.cap));
      if (got > 0.0) {
        e.cap -= got;
        adj_[e.to][e.rev].cap += got;
        return got;
      }
    }
  }
  return 0.0;
}

double FlowNetwork::max_flow(int s, int t) {
  if (s == t) throw std::invalid_argument("FlowNetwork: source equals sink");
  double flow = 0.0;
  while (bfs(s, t)) {
    iter_.assign(node_count(), 0);
    while (true) {
      const double got = dfs(s, t, std::numeric_limits<double>::infinity());
      if (got <= 0.0) break;
      flow += got;
    }
  }
  return flow;
}

}  // namespace lrpx
