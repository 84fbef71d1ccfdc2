#pragma once

// Dinic max-flow on real capacities, used for the two-phase surface cell cuts.

#include <cstddef>
#include <vector>

namespace sdh {

class MaxFlow {
 public:
  explicit MaxFlow(int nodes);

  int nodes() const { return static_cast<int>(adj_.size()); }
  /// Directed arc u -> v with capacity cap >= 0.
  void add_arc(int u, int v, double cap);
  /// Returns the value of a maximum s-t flow.
  double solve(int s, int t);
  /// After solve: true for nodes reachable from s in the residual graph.
  std::vector<bool> source_side() const;

 private:
  struct Arc {
    int to;
    std::size_t rev;
    double cap;
  };
  bool bfs(int s, int t);
  double dfs(int u, int t, double pushed);

  std::vector<std::vector<Arc>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
  double eps_ = 0.0;
  int source_ = -1;
};

}  // namespace sdh
