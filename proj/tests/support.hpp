// Shared helpers for the test suites: tiny random graphs and brute-force
// oracles for assignment problems.
#pragma once

#include <vgreg/matchers.hpp>
#include <vgreg/synth.hpp>

#include <algorithm>
#include <numeric>

namespace vgreg::testing {

/// Random spatial graph with straight three-point edges; every node gets at
/// least one incident edge when n >= 2.
inline SpatialGraph random_graph(Rng& rng, std::size_t n, double edge_prob = 0.6) {
  std::vector<Node> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].id = i;
    nodes[i].coord = Vec3(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10));
  }
  auto edge = [&](std::size_t a, std::size_t b) {
    const Vec3 mid = 0.5 * (nodes[a].coord + nodes[b].coord) + 0.5 * rng.in_unit_ball();
    Polyline path{nodes[a].coord, mid, nodes[b].coord};
    return make_edge(a, b, path, arc_length(path) * rng.uniform(0.5, 1.5));
  };
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (rng.uniform() < edge_prob) edges.push_back(edge(a, b));
  for (std::size_t a = 0; a < n && n >= 2; ++a) {
    const bool touched = std::any_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.a == a || e.b == a; });
    if (!touched) edges.push_back(a + 1 < n ? edge(a, a + 1) : edge(0, a));
  }
  return SpatialGraph(nodes, edges);
}

/// Copy of g with every coordinate jittered by up to `noise` and node ids
/// shuffled by `perm` (new id of old node i is perm[i]).
inline SpatialGraph jittered_relabel(const SpatialGraph& g, Rng& rng, double noise, const Permutation& perm) {
  std::vector<Vec3> shift(g.node_count());
  for (auto& s : shift) s = noise * rng.in_unit_ball();
  std::vector<Node> nodes(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    nodes[perm[i]].id = perm[i];
    nodes[perm[i]].coord = g.node(i).coord + shift[i];
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    Polyline path = e.path;
    path.front() = nodes[perm[e.a]].coord;
    path.back() = nodes[perm[e.b]].coord;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) path[k] += noise * rng.in_unit_ball();
    edges.push_back(make_edge(perm[e.a], perm[e.b], path, e.energy));
  }
  return SpatialGraph(nodes, edges);
}

inline Permutation random_permutation(Rng& rng, std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t k = n; k > 1; --k) std::swap(p[k - 1], p[rng.index(k)]);
  return p;
}

inline Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

/// Calls fn(p) for every injective map of rows into cols (rows <= cols) or
/// every partial map covering all cols (rows > cols).
template <typename Fn>
void for_each_assignment(std::size_t rows, std::size_t cols, Fn fn) {
  const std::size_t n = std::max(rows, cols);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  do {
    Permutation p(rows, kUnassigned);
    for (std::size_t i = 0; i < rows; ++i) p[i] = order[i] < cols ? order[i] : kUnassigned;
    fn(p);
  } while (std::next_permutation(order.begin(), order.end()));
}

struct BruteForce {
  double value = -std::numeric_limits<double>::infinity();
  Permutation argmax;
};

inline BruteForce brute_force_qap(const AffinityFactors& f) {
  BruteForce best;
  for_each_assignment(static_cast<std::size_t>(f.rows()), static_cast<std::size_t>(f.cols()), [&](const Permutation& p) {
    const double j = qap_objective(f, p);
    if (j > best.value) best = {j, p};
  });
  return best;
}

inline BruteForce brute_force_linear(const Matrix& S) {
  BruteForce best;
  for_each_assignment(static_cast<std::size_t>(S.rows()), static_cast<std::size_t>(S.cols()), [&](const Permutation& p) {
    const double v = linear_score(S, p);
    if (v > best.value) best = {v, p};
  });
  return best;
}

}  // namespace vgreg::testing
