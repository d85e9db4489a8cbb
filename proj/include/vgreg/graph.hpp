// graph.hpp - attributed spatial graph: nodes with coordinates and geodesic
// degree, undirected edges carrying a sampled path, its length and energy.
#pragma once

#include "core.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vgreg {

using Polyline = std::vector<Vec3>;

struct Node {
  std::size_t id = 0;
  Vec3 coord = Vec3::Zero();
  double degree_geo = 0.0;  // mean energy of incident edges, derived
  std::optional<std::string> label;
};

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  Polyline path;
  double length = 0.0;  // euclidean arc length of path
  double energy = 0.0;  // geodesic integral along path

  [[nodiscard]] std::size_t other(std::size_t n) const { return n == a ? b : a; }
};

/// Builds an edge whose length is measured from its path.
inline Edge make_edge(std::size_t a, std::size_t b, Polyline path, double energy) {
  Edge e;
  e.a = a;
  e.b = b;
  e.length = arc_length(path);
  e.path = std::move(path);
  e.energy = energy;
  return e;
}

/// What to do when two edges join the same unordered node pair.
enum class DuplicateEdges { reject, keep_lower_energy };

/// Whether node degrees are re-derived at construction or taken as given.
enum class Degrees { recompute, keep };

class SpatialGraph {
 public:
  SpatialGraph() = default;

  SpatialGraph(std::vector<Node> nodes, std::vector<Edge> edges,
               DuplicateEdges dup = DuplicateEdges::keep_lower_energy,
               Degrees degrees = Degrees::recompute)
      : nodes_(std::move(nodes)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      nodes_[i].id = i;
      if (!is_finite(nodes_[i].coord))
        throw InvariantError("node " + std::to_string(i) + " has a non-finite coordinate");
    }
    incident_.assign(nodes_.size(), {});
    const double tau = endpoint_tolerance();
    for (auto& e : edges) {
      validate_edge(e, tau);
      const auto key = pair_key(e.a, e.b);
      if (auto it = lookup_.find(key); it != lookup_.end()) {
        if (dup == DuplicateEdges::reject)
          throw InvariantError("duplicate edge between nodes " + std::to_string(e.a) + " and " +
                               std::to_string(e.b));
        if (e.energy < edges_[it->second].energy) edges_[it->second] = std::move(e);
        continue;
      }
      lookup_.emplace(key, edges_.size());
      incident_[e.a].push_back(edges_.size());
      incident_[e.b].push_back(edges_.size());
      edges_.push_back(std::move(e));
    }
    if (degrees == Degrees::recompute) refresh_degrees();
  }

  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
  [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }

  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

  [[nodiscard]] const Node& node(std::size_t i) const {
    check_node(i);
    return nodes_[i];
  }
  [[nodiscard]] const Edge& edge(std::size_t e) const {
    if (e >= edges_.size()) throw IndexError("edge index " + std::to_string(e) + " out of range");
    return edges_[e];
  }

  /// Indices of edges incident to node i.
  [[nodiscard]] const std::vector<std::size_t>& incident(std::size_t i) const {
    check_node(i);
    return incident_[i];
  }

  /// Edge index joining a and b, in either order.
  [[nodiscard]] std::optional<std::size_t> find_edge(std::size_t a, std::size_t b) const {
    if (a >= nodes_.size() || b >= nodes_.size() || a == b) return std::nullopt;
    if (auto it = lookup_.find(pair_key(a, b)); it != lookup_.end()) return it->second;
    return std::nullopt;
  }

  [[nodiscard]] std::vector<Vec3> coordinates() const {
    std::vector<Vec3> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.coord);
    return out;
  }

  [[nodiscard]] Box bounding_box() const {
    const auto c = coordinates();
    return Box::of(c);
  }

  /// Tolerance for path endpoints coinciding with node coordinates.
  [[nodiscard]] double endpoint_tolerance() const {
    return std::max(1e-6 * bounding_box().diagonal(), 1e-12);
  }

 private:
  static std::uint64_t pair_key(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  }

  void check_node(std::size_t i) const {
    if (i >= nodes_.size())
      throw IndexError("node index " + std::to_string(i) + " out of range (" +
                       std::to_string(nodes_.size()) + " nodes)");
  }

  void validate_edge(const Edge& e, double tau) const {
    const auto name = "edge (" + std::to_string(e.a) + ", " + std::to_string(e.b) + ")";
    if (e.a >= nodes_.size() || e.b >= nodes_.size())
      throw InvariantError(name + " references a missing node");
    if (e.a == e.b) throw InvariantError(name + " is a self-loop");
    if (e.path.size() < 2) throw InvariantError(name + " path has fewer than 2 points");
    for (std::size_t k = 0; k < e.path.size(); ++k) {
      if (!is_finite(e.path[k])) throw InvariantError(name + " path has a non-finite point");
      if (k > 0 && e.path[k] == e.path[k - 1])
        throw InvariantError(name + " path repeats a point");
    }
    const bool forward = (e.path.front() - nodes_[e.a].coord).norm() <= tau &&
                         (e.path.back() - nodes_[e.b].coord).norm() <= tau;
    const bool backward = (e.path.front() - nodes_[e.b].coord).norm() <= tau &&
                          (e.path.back() - nodes_[e.a].coord).norm() <= tau;
    if (!forward && !backward) throw InvariantError(name + " path endpoints do not meet its nodes");
    const double measured = arc_length(e.path);
    if (!(e.length >= 0.0) || std::abs(measured - e.length) > 1e-9 * std::max(measured, 1.0))
      throw InvariantError(name + " length disagrees with its path");
    if (!(e.energy >= 0.0) || !std::isfinite(e.energy))
      throw InvariantError(name + " energy must be finite and non-negative");
  }

  void refresh_degrees() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      double sum = 0.0;
      for (auto e : incident_[i]) sum += edges_[e].energy;
      nodes_[i].degree_geo = incident_[i].empty() ? 0.0 : sum / static_cast<double>(incident_[i].size());
    }
  }

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> incident_;
  std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

/// Mean energy of the edges incident to `node`; 0 for an isolated node.
inline double geodesic_degree(const SpatialGraph& g, std::size_t node) {
  const auto& inc = g.incident(node);
  if (inc.empty()) return 0.0;
  double sum = 0.0;
  for (auto e : inc) sum += g.edges()[e].energy;
  return sum / static_cast<double>(inc.size());
}

inline SpatialGraph recompute_degrees(const SpatialGraph& g) {
  return SpatialGraph(g.nodes(), g.edges(), DuplicateEdges::reject, Degrees::recompute);
}

/// True when every node's stored degree equals geodesic_degree exactly.
inline bool degrees_consistent(const SpatialGraph& g) {
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (g.nodes()[i].degree_geo != geodesic_degree(g, i)) return false;
  return true;
}

/// Same nodes, different edge set. Degrees are re-derived.
inline SpatialGraph with_edges(const SpatialGraph& g, std::vector<Edge> edges) {
  return SpatialGraph(g.nodes(), std::move(edges), DuplicateEdges::reject);
}

// ---------------------------------------------------------------------------
// Over-connection

using PathProvider = std::function<std::optional<Edge>(const Node&, const Node&)>;

struct OverConnectResult {
  SpatialGraph graph;
  std::vector<std::pair<std::size_t, std::size_t>> skipped;  // provider failures
};

/// Connects every unordered node pair whose coordinate distance is within
/// `radius` (infinity for a complete graph). Pairs for which the provider
/// returns nothing or throws are skipped and reported.
inline OverConnectResult over_connect(const std::vector<Node>& nodes, const PathProvider& provider,
                                      double radius) {
  if (!(radius > 0.0)) throw ArgumentError("over_connect: radius must be positive");
  OverConnectResult out;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if ((nodes[i].coord - nodes[j].coord).norm() > radius) continue;
      std::optional<Edge> e;
      try {
        e = provider(nodes[i], nodes[j]);
      } catch (const std::exception&) {
        e.reset();
      }
      if (!e) {
        out.skipped.emplace_back(i, j);
        continue;
      }
      e->a = i;
      e->b = j;
      if (!e->path.empty() && (e->path.front() - nodes[i].coord).norm() >
                                  (e->path.front() - nodes[j].coord).norm())
        std::reverse(e->path.begin(), e->path.end());
      edges.push_back(std::move(*e));
    }
  }
  out.graph = SpatialGraph(nodes, std::move(edges));
  return out;
}

// ---------------------------------------------------------------------------
// Minimum spanning tree

enum class EdgeWeight { length, energy };

inline double edge_weight(const Edge& e, EdgeWeight w) {
  return w == EdgeWeight::length ? e.length : e.energy;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

struct SpanningTreeResult {
  SpatialGraph tree;
  bool spanning_forest = false;  // input was disconnected
  std::size_t components = 0;
};

/// Kruskal; ties resolved by original edge order.
inline SpanningTreeResult minimum_spanning_tree(const SpatialGraph& g,
                                                EdgeWeight weight = EdgeWeight::energy) {
  SpanningTreeResult out;
  if (g.empty()) return out;
  std::vector<std::size_t> order(g.edge_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return edge_weight(g.edges()[x], weight) < edge_weight(g.edges()[y], weight);
  });
  DisjointSets sets(g.node_count());
  std::vector<bool> keep(g.edge_count(), false);
  std::size_t kept = 0;
  for (auto e : order) {
    if (sets.unite(g.edges()[e].a, g.edges()[e].b)) {
      keep[e] = true;
      ++kept;
    }
  }
  std::vector<Edge> edges;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (keep[e]) edges.push_back(g.edges()[e]);
  out.components = g.node_count() - kept;
  out.spanning_forest = out.components > 1;
  out.tree = with_edges(g, std::move(edges));
  return out;
}

inline double total_weight(const SpatialGraph& g, EdgeWeight weight = EdgeWeight::energy) {
  double s = 0.0;
  for (const auto& e : g.edges()) s += edge_weight(e, weight);
  return s;
}

inline std::size_t component_count(const SpatialGraph& g) {
  DisjointSets sets(g.node_count());
  std::size_t comps = g.node_count();
  for (const auto& e : g.edges())
    if (sets.unite(e.a, e.b)) --comps;
  return comps;
}

/// Flags the bridges of the graph (edges whose removal disconnects it).
inline std::vector<bool> find_bridges(const SpatialGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<bool> bridge(g.edge_count(), false);
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    std::size_t node;
    std::size_t via;  // edge used to enter, or npos
    std::size_t next = 0;
  };
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<Frame> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    disc[root] = low[root] = timer++;
    stack.push_back({root, npos});
    while (!stack.empty()) {
      auto& f = stack.back();
      const auto& inc = g.incident(f.node);
      if (f.next < inc.size()) {
        const auto e = inc[f.next++];
        if (e == f.via) continue;
        const auto to = g.edges()[e].other(f.node);
        if (disc[to] < 0) {
          disc[to] = low[to] = timer++;
          stack.push_back({to, e});
        } else {
          low[f.node] = std::min(low[f.node], disc[to]);
        }
      } else {
        const auto done = f;
        stack.pop_back();
        if (!stack.empty()) {
          auto& parent = stack.back();
          low[parent.node] = std::min(low[parent.node], low[done.node]);
          if (low[done.node] > disc[parent.node]) bridge[done.via] = true;
        }
      }
    }
  }
  return bridge;
}

// ---------------------------------------------------------------------------
// Polyline resampling

struct ResampleResult {
  Polyline points;
  bool degenerate = false;  // zero-length input
};

/// Uniform arc-length resampling to `n_samples` points. Endpoints are copied
/// bit-exactly from the input.
inline ResampleResult polyline_resample(std::span<const Vec3> path, std::size_t n_samples) {
  if (n_samples < 2) throw ArgumentError("polyline_resample: need at least 2 samples");
  if (path.empty()) throw ArgumentError("polyline_resample: empty path");
  ResampleResult out;
  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t k = 1; k < path.size(); ++k) cum[k] = cum[k - 1] + (path[k] - path[k - 1]).norm();
  const double total = cum.back();
  if (!(total > 0.0)) {
    out.points.assign(n_samples, path.front());
    out.degenerate = true;
    return out;
  }
  out.points.reserve(n_samples);
  out.points.push_back(path.front());
  std::size_t seg = 0;
  const double snap = 1e-12 * total;
  for (std::size_t s = 1; s + 1 < n_samples; ++s) {
    const double target = total * static_cast<double>(s) / static_cast<double>(n_samples - 1);
    while (seg + 2 < path.size() && cum[seg + 1] < target) ++seg;
    if (std::abs(cum[seg + 1] - target) <= snap) {
      out.points.push_back(path[seg + 1]);
      continue;
    }
    if (std::abs(cum[seg] - target) <= snap) {
      out.points.push_back(path[seg]);
      continue;
    }
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 0.0 ? (target - cum[seg]) / span : 0.0;
    out.points.push_back(path[seg] + t * (path[seg + 1] - path[seg]));
  }
  out.points.push_back(path.back());
  return out;
}

}  // namespace vgreg
