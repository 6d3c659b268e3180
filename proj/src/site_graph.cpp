#include "prethermal/site_graph.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <queue>
#include <sstream>

namespace prethermal {

SiteGraph::SiteGraph(int num_sites, std::vector<std::pair<int, int>> edges, int local_dim,
                     std::size_t dimension_cap)
    : num_sites_(num_sites), local_dim_(local_dim), dimension_cap_(dimension_cap),
      edges_(std::move(edges)) {
  if (num_sites < 1 || num_sites > 31) throw ValidationError("site count must lie in [1, 31]");
  if (local_dim < 2) throw ValidationError("local dimension must be at least 2");
  full_dim_ = 1;
  for (int i = 0; i < num_sites; ++i) {
    if (full_dim_ > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(local_dim))
      throw DimensionCapError("Hilbert dimension overflows");
    full_dim_ *= static_cast<std::size_t>(local_dim);
  }
  adjacency_.assign(num_sites, {});
  for (auto& [a, b] : edges_) {
    if (a < 0 || b < 0 || a >= num_sites || b >= num_sites || a == b) {
      std::ostringstream msg;
      msg << "invalid edge (" << a << ", " << b << ")";
      throw ValidationError(msg.str());
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& [a, b] : edges_) {
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());

  distance_.assign(num_sites, std::vector<int>(num_sites, -1));
  for (int s = 0; s < num_sites; ++s) {
    std::queue<int> q;
    distance_[s][s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adjacency_[u]) {
        if (distance_[s][v] < 0) {
          distance_[s][v] = distance_[s][u] + 1;
          q.push(v);
        }
      }
    }
  }
}

SiteGraph SiteGraph::chain(int num_sites, int local_dim, bool periodic, std::size_t dimension_cap) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < num_sites; ++i) edges.emplace_back(i, i + 1);
  if (periodic && num_sites > 2) edges.emplace_back(0, num_sites - 1);
  return SiteGraph(num_sites, std::move(edges), local_dim, dimension_cap);
}

std::size_t SiteGraph::hilbert_dim() const {
  if (full_dim_ > dimension_cap_) {
    std::ostringstream msg;
    msg << "Hilbert dimension " << full_dim_ << " exceeds cap " << dimension_cap_;
    throw DimensionCapError(msg.str());
  }
  return full_dim_;
}

bool SiteGraph::is_connected() const { return is_connected(all_sites()); }

bool SiteGraph::is_connected(SiteMask mask) const {
  if (mask == 0) return false;
  const int start = std::countr_zero(mask);
  SiteMask seen = SiteMask{1} << start;
  std::vector<int> stack{start};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adjacency_[u]) {
      const SiteMask bit = SiteMask{1} << v;
      if ((mask & bit) && !(seen & bit)) {
        seen |= bit;
        stack.push_back(v);
      }
    }
  }
  return seen == mask;
}

int SiteGraph::diameter(SiteMask mask) const {
  int diam = 0;
  const auto sites = sites_of(mask);
  for (int a : sites)
    for (int b : sites) {
      if (distance_[a][b] < 0) return std::numeric_limits<int>::max();
      diam = std::max(diam, distance_[a][b]);
    }
  return diam;
}

std::vector<int> SiteGraph::shortest_path(SiteMask from, SiteMask to) const {
  // Multi-source BFS from `from`; neighbors visited in increasing order so
  // the first target reached (and its path) is deterministic.
  std::vector<int> parent(num_sites_, -2);
  std::queue<int> q;
  for (int s : sites_of(from)) {
    parent[s] = -1;
    q.push(s);
  }
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    if (to & (SiteMask{1} << u)) {
      std::vector<int> path;
      for (int v = u; v >= 0; v = parent[v]) path.push_back(v);
      return path;
    }
    for (int v : adjacency_[u]) {
      if (parent[v] == -2) {
        parent[v] = u;
        q.push(v);
      }
    }
  }
  return {};
}

SiteMask SiteGraph::connected_superset(SiteMask mask) const {
  if (mask == 0 || is_connected(mask)) return mask;
  SiteMask result = mask;
  while (!is_connected(result)) {
    // Component holding the lowest site.
    const int start = std::countr_zero(result);
    SiteMask comp = SiteMask{1} << start;
    std::vector<int> stack{start};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adjacency_[u]) {
        const SiteMask bit = SiteMask{1} << v;
        if ((result & bit) && !(comp & bit)) {
          comp |= bit;
          stack.push_back(v);
        }
      }
    }
    const auto path = shortest_path(comp, result & ~comp);
    if (path.empty()) throw ValidationError("support spans disconnected graph components");
    for (int v : path) result |= SiteMask{1} << v;
  }
  return result;
}

std::vector<int> SiteGraph::sites_of(SiteMask mask) {
  std::vector<int> sites;
  while (mask) {
    sites.push_back(std::countr_zero(mask));
    mask &= mask - 1;
  }
  return sites;
}

SiteMask SiteGraph::mask_of(const std::vector<int>& sites) {
  SiteMask mask = 0;
  for (int s : sites) mask |= SiteMask{1} << s;
  return mask;
}

} // namespace prethermal
