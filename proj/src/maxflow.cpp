#include "sdhom/maxflow.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace sdh {

MaxFlow::MaxFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)) {
  if (nodes < 2) throw std::invalid_argument("MaxFlow needs at least two nodes");
}

void MaxFlow::add_arc(int u, int v, double cap) {
  if (!(cap >= 0.0)) throw std::invalid_argument("arc capacity must be nonnegative");
  if (u == v || cap == 0.0) return;
  auto& au = adj_[static_cast<std::size_t>(u)];
  auto& av = adj_[static_cast<std::size_t>(v)];
  au.push_back({v, av.size(), cap});
  av.push_back({u, au.size() - 1, 0.0});
  eps_ = std::max(eps_, cap);
}

bool MaxFlow::bfs(int s, int t) {
  level_.assign(adj_.size(), -1);
  std::queue<int> q;
  level_[static_cast<std::size_t>(s)] = 0;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const Arc& a : adj_[static_cast<std::size_t>(u)])
      if (a.cap > eps_ && level_[static_cast<std::size_t>(a.to)] < 0) {
        level_[static_cast<std::size_t>(a.to)] = level_[static_cast<std::size_t>(u)] + 1;
        q.push(a.to);
      }
  }
  return level_[static_cast<std::size_t>(t)] >= 0;
}

double MaxFlow::dfs(int u, int t, double pushed) {
  if (u == t) return pushed;
  auto& arcs = adj_[static_cast<std::size_t>(u)];
  for (std::size_t& i = iter_[static_cast<std::size_t>(u)]; i < arcs.size(); ++i) {
    Arc& a = arcs[i];
    if (a.cap <= eps_ || level_[static_cast<std::size_t>(a.to)] != level_[static_cast<std::size_t>(u)] + 1)
      continue;
    const double got = dfs(a.to, t, std::min(pushed, a.cap));
    if (got > 0.0) {
      a.cap -= got;
      adj_[static_cast<std::size_t>(a.to)][a.rev].cap += got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::solve(int s, int t) {
  // Residuals below eps count as saturated.
  eps_ *= 1e-12;
  source_ = s;
  double flow = 0.0;
  while (bfs(s, t)) {
    iter_.assign(adj_.size(), 0);
    while (true) {
      const double f = dfs(s, t, std::numeric_limits<double>::infinity());
      if (f <= 0.0) break;
      flow += f;
    }
  }
  return flow;
}

std::vector<bool> MaxFlow::source_side() const {
  if (source_ < 0) throw std::logic_error("source_side called before solve");
  std::vector<bool> seen(adj_.size(), false);
  std::queue<int> q;
  seen[static_cast<std::size_t>(source_)] = true;
  q.push(source_);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const Arc& a : adj_[static_cast<std::size_t>(u)])
      if (a.cap > eps_ && !seen[static_cast<std::size_t>(a.to)]) {
        seen[static_cast<std::size_t>(a.to)] = true;
        q.push(a.to);
      }
  }
  return seen;
}

}  // namespace sdh
