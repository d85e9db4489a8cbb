// synth.hpp - synthetic vascular trees, over-connected geodesic graphs built
// from them, smooth random displacement fields and topological pruning.
#pragma once

#include "graph.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <limits>

namespace vgreg {

/// Scalar field standing in for the vesselness cost of an angiogram:
/// phi(p) = 1 + A sin(2 pi x / w) sin(2 pi y / w) sin(2 pi z / w).
struct SyntheticPotential {
  double amplitude = 0.5;
  double wavelength = 25.0;  // bbox edge / 4 for the default 100^3 box

  [[nodiscard]] double operator()(const Vec3& p) const {
    const double k = 2.0 * M_PI / wavelength;
    return 1.0 + amplitude * std::sin(k * p.x()) * std::sin(k * p.y()) * std::sin(k * p.z());
  }

  /// Trapezoidal line integral of the potential along a polyline.
  [[nodiscard]] double integrate(std::span<const Vec3> path) const {
    double total = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k)
      total += 0.5 * ((*this)(path[k - 1]) + (*this)(path[k])) * (path[k] - path[k - 1]).norm();
    return total;
  }
};

/// Straight path from `from` to `to`, sampled roughly every `spacing` units.
inline Polyline straight_path(const Vec3& from, const Vec3& to, double spacing) {
  const double len = (to - from).norm();
  const auto count = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(len / spacing)) + 1);
  Polyline p;
  p.reserve(count);
  p.push_back(from);
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(count - 1);
    p.push_back(from + t * (to - from));
  }
  p.push_back(to);
  return p;
}

struct TreeSpec {
  std::uint64_t seed = 0;
  std::size_t n_nodes = 80;
  Box bbox{Vec3(0, 0, 0), Vec3(100, 100, 100)};
  double branch_step = 15.0;
  double branch_angle_spread = 0.7;  // radians
  double path_spacing = 2.0;

  void validate() const {
    if (n_nodes < 2) throw ArgumentError("TreeSpec: n_nodes must be at least 2");
    const Vec3 ext = bbox.extent();
    if (!(ext.array() > 0.0).all()) throw ArgumentError("TreeSpec: bounding box is degenerate");
    if (!(branch_step > 0.0) || !(path_spacing > 0.0))
      throw ArgumentError("TreeSpec: branch_step and path_spacing must be positive");
  }
};

inline SyntheticPotential potential_for(const Box& bbox) {
  SyntheticPotential phi;
  phi.wavelength = bbox.extent().maxCoeff() / 4.0;
  return phi;
}

namespace detail {

inline Vec3 any_perpendicular(const Vec3& d) {
  const Vec3 helper = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return d.cross(helper).normalized();
}

/// Gently curved path: quadratic Bezier through a laterally offset control.
inline Polyline curved_path(const Vec3& from, const Vec3& to, const Vec3& bend, double spacing) {
  const Vec3 ctrl = 0.5 * (from + to) + bend;
  // Bezier arc length is close to the chord for small bends.
  const double approx = (ctrl - from).norm() + (to - ctrl).norm();
  const auto count = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(approx / spacing)) + 1);
  Polyline p;
  p.reserve(count);
  p.push_back(from);
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(count - 1);
    const double u = 1.0 - t;
    p.push_back(u * u * from + 2.0 * u * t * ctrl + t * t * to);
  }
  p.push_back(to);
  return p;
}

}  // namespace detail

/// Grows a random branching tree with `n_nodes` junctions/endpoints inside the
/// box. Bifurcation degree is capped at 3. Deterministic in the seed.
inline SpatialGraph generate_tree(const TreeSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, 0x7EEE);
  const SyntheticPotential phi = potential_for(spec.bbox);
  const Vec3 ext = spec.bbox.extent();
  const double margin = std::min(2.0, 0.02 * ext.minCoeff());
  const double min_sep = 0.35 * spec.branch_step;

  std::vector<Node> nodes;
  std::vector<Vec3> heading;
  std::vector<int> degree;
  std::vector<Edge> edges;

  Node root;
  root.coord = Vec3(spec.bbox.lo.x() + ext.x() * rng.uniform(0.4, 0.6),
                    spec.bbox.lo.y() + ext.y() * rng.uniform(0.4, 0.6), spec.bbox.hi.z() - 2.0 * margin);
  nodes.push_back(root);
  heading.push_back(-Vec3::UnitZ());
  degree.push_back(0);

  const std::size_t max_attempts = 2000 * spec.n_nodes;
  std::size_t attempts = 0;
  while (nodes.size() < spec.n_nodes) {
    if (++attempts > max_attempts)
      throw DegenerateError("generate_tree: could not place nodes; box too small for branch_step");
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (degree[i] < (i == 0 ? 2 : 3)) open.push_back(i);
    const std::size_t parent = open[rng.index(open.size())];

    const Vec3 axis = detail::any_perpendicular(heading[parent]);
    const double spin = rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 lateral =
        Eigen::AngleAxisd(spin, heading[parent]) * axis;  // random unit vector normal to heading
    const double branching = degree[parent] > (parent == 0 ? 0 : 1) ? 1.6 : 1.0;
    const double angle = rng.uniform(0.2, 1.0) * spec.branch_angle_spread * branching;
    const Vec3 dir = (std::cos(angle) * heading[parent] + std::sin(angle) * lateral).normalized();
    const double len = spec.branch_step * rng.uniform(0.6, 1.4);
    const Vec3 from = nodes[parent].coord;
    const Vec3 to = from + len * dir;
    if (!spec.bbox.contains(to, -margin)) continue;
    bool crowded = false;
    for (const auto& n : nodes)
      if ((n.coord - to).norm() < min_sep) {
        crowded = true;
        break;
      }
    if (crowded) continue;

    const Vec3 bend = rng.uniform(-0.15, 0.15) * len * detail::any_perpendicular(dir);
    Polyline path = detail::curved_path(from, to, bend, spec.path_spacing);
    bool inside = true;
    for (const auto& p : path) inside = inside && spec.bbox.contains(p);
    if (!inside) continue;

    Node child;
    child.coord = to;
    const std::size_t c = nodes.size();
    nodes.push_back(child);
    heading.push_back(dir);
    degree.push_back(1);
    ++degree[parent];
    const double energy = phi.integrate(path);
    edges.push_back(make_edge(parent, c, std::move(path), energy));
  }
  return SpatialGraph(std::move(nodes), std::move(edges), DuplicateEdges::reject);
}

struct GvgOptions {
  double path_spacing = 2.0;
  SyntheticPotential potential{};  // must match the field used to grow the tree
};

/// Over-connects a tree: every node pair within `radius` gets an edge. Pairs
/// already joined in the tree keep their tree path; new pairs get a straight
/// path whose energy integrates the synthetic potential.
inline OverConnectResult build_gvg(const SpatialGraph& tree, double radius, const GvgOptions& opt = {}) {
  const SyntheticPotential& phi = opt.potential;
  auto provider = [&](const Node& a, const Node& b) -> std::optional<Edge> {
    if (auto e = tree.find_edge(a.id, b.id)) return tree.edges()[*e];
    Polyline p = straight_path(a.coord, b.coord, opt.path_spacing);
    const double u = phi.integrate(p);
    return make_edge(a.id, b.id, std::move(p), u);
  };
  return over_connect(tree.nodes(), provider, radius);
}

/// One synthetic over-connected graph: a random tree with `n_nodes` nodes in
/// the default box, over-connected within `radius`.
inline SpatialGraph synthetic_gvg(std::uint64_t seed, std::size_t n_nodes = 80, double radius = 35.0) {
  TreeSpec spec;
  spec.seed = seed;
  spec.n_nodes = n_nodes;
  GvgOptions opt;
  opt.path_spacing = spec.path_spacing;
  opt.potential = potential_for(spec.bbox);
  return build_gvg(generate_tree(spec), radius, opt).graph;
}

// ---------------------------------------------------------------------------
// Displacement fields

/// Random offsets on a coarse control grid, blended with smoothstep-weighted
/// trilinear interpolation (C1 across cells). Weights are convex, so the
/// field's maximum magnitude is attained on the grid.
class DisplacementField {
 public:
  static constexpr int kCells = 4;

  DisplacementField(const Box& box, double max_magnitude, std::uint64_t seed) : box_(box) {
    Rng rng(seed, 0xDEF0);
    offsets_.resize(kNodes * kNodes * kNodes);
    double peak = 0.0;
    for (auto& o : offsets_) {
      o = rng.in_unit_ball();
      peak = std::max(peak, o.norm());
    }
    const double scale = peak > 0.0 ? max_magnitude / peak : 0.0;
    for (auto& o : offsets_) o *= scale;
  }

  [[nodiscard]] Vec3 operator()(const Vec3& p) const {
    const Vec3 ext = box_.extent();
    std::array<int, 3> cell{};
    std::array<double, 3> w{};
    for (int d = 0; d < 3; ++d) {
      double u = ext[d] > 0.0 ? (p[d] - box_.lo[d]) / ext[d] * kCells : 0.0;
      u = std::clamp(u, 0.0, static_cast<double>(kCells));
      int c = std::min(static_cast<int>(std::floor(u)), kCells - 1);
      const double t = u - c;
      cell[d] = c;
      w[d] = t * t * (3.0 - 2.0 * t);
    }
    Vec3 out = Vec3::Zero();
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double weight = (dx ? w[0] : 1 - w[0]) * (dy ? w[1] : 1 - w[1]) * (dz ? w[2] : 1 - w[2]);
          out += weight * at(cell[0] + dx, cell[1] + dy, cell[2] + dz);
        }
    return out;
  }

  [[nodiscard]] double max_control_magnitude() const {
    double m = 0.0;
    for (const auto& o : offsets_) m = std::max(m, o.norm());
    return m;
  }

  [[nodiscard]] const Box& box() const { return box_; }

 private:
  static constexpr int kNodes = kCells + 1;
  [[nodiscard]] const Vec3& at(int x, int y, int z) const { return offsets_[(z * kNodes + y) * kNodes + x]; }

  Box box_;
  std::vector<Vec3> offsets_;
};

enum class EnergyUpdate { reintegrate, keep };

struct DeformOptions {
  EnergyUpdate energies = EnergyUpdate::reintegrate;
  SyntheticPotential potential{};
};

/// Maps every node and path point through `fn`; lengths are re-measured.
template <typename Fn>
SpatialGraph warp_graph(const SpatialGraph& g, Fn&& fn, EnergyUpdate energies,
                        const SyntheticPotential& phi) {
  std::vector<Node> nodes = g.nodes();
  for (auto& n : nodes) n.coord = fn(n.coord);
  std::vector<Edge> edges;
  edges.reserve(g.edge_count());
  for (const auto& e : g.edges()) {
    Polyline path;
    path.reserve(e.path.size());
    for (std::size_t k = 0; k < e.path.size(); ++k) {
      Vec3 q = fn(e.path[k]);
      if (!path.empty() && q == path.back()) {
        if (k + 1 < e.path.size()) continue;
        path.pop_back();
      }
      path.push_back(q);
    }
    if (path.size() < 2) path = {nodes[e.a].coord, nodes[e.b].coord};
    const double u = energies == EnergyUpdate::reintegrate ? phi.integrate(path) : e.energy;
    edges.push_back(make_edge(e.a, e.b, std::move(path), u));
  }
  return SpatialGraph(std::move(nodes), std::move(edges), DuplicateEdges::reject);
}

/// Displaces the graph with a smooth random field whose maximum magnitude is
/// `fraction` of the node bounding-box diagonal.
inline SpatialGraph deform(const SpatialGraph& g, double fraction, std::uint64_t seed,
                           const DeformOptions& opt = {}) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("deform: fraction must be in [0, 1]");
  if (fraction == 0.0 || g.empty()) return g;
  const Box box = g.bounding_box();
  const DisplacementField field(box, fraction * box.diagonal(), seed);
  return warp_graph(g, [&](const Vec3& p) -> Vec3 { return p + field(p); }, opt.energies, opt.potential);
}

enum class PruneMode { non_bridge_first, uniform };

/// Removes floor(fraction * |E|) edges at random. By default non-bridge edges
/// are drawn first so the graph stays connected while that is possible.
inline SpatialGraph prune(const SpatialGraph& g, double fraction, std::uint64_t seed,
                          PruneMode mode = PruneMode::non_bridge_first) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ArgumentError("prune: fraction must be in [0, 1)");
  const auto quota = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(g.edge_count()) + 1e-9));
  if (quota == 0) return g;
  Rng rng(seed, 0x9121E);
  std::vector<Edge> edges = g.edges();
  for (std::size_t removed = 0; removed < quota; ++removed) {
    std::vector<std::size_t> pool;
    if (mode == PruneMode::non_bridge_first) {
      const SpatialGraph current(g.nodes(), edges, DuplicateEdges::reject, Degrees::keep);
      const auto bridge = find_bridges(current);
      for (std::size_t e = 0; e < edges.size(); ++e)
        if (!bridge[e]) pool.push_back(e);
    }
    if (pool.empty()) {
      pool.resize(edges.size());
      std::iota(pool.begin(), pool.end(), std::size_t{0});
    }
    edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(pool[rng.index(pool.size())]));
  }
  return with_edges(g, std::move(edges));
}

}  // namespace vgreg
