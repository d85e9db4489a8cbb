// kdtree.hpp - exact nearest-neighbour queries over a static 3D point set.
#pragma once

#include "core.hpp"

#include <algorithm>
#include <numeric>

namespace vgreg {

class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)), order_(pts_.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!pts_.empty()) build(0, pts_.size(), 0);
  }

  [[nodiscard]] std::size_t size() const { return pts_.size(); }
  [[nodiscard]] const Vec3& point(std::size_t i) const { return pts_[i]; }

  struct Hit {
    std::size_t index = 0;
    double dist2 = std::numeric_limits<double>::infinity();
  };

  /// Nearest stored point; ties go to the lower index.
  [[nodiscard]] Hit nearest(const Vec3& q) const {
    Hit best;
    if (!pts_.empty()) search(0, pts_.size(), 0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeaf = 8;

  void build(std::size_t lo, std::size_t hi, int depth) {
    if (hi - lo <= kLeaf) return;
    const int axis = depth % 3;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       return pts_[a][axis] < pts_[b][axis] || (pts_[a][axis] == pts_[b][axis] && a < b);
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void consider(std::size_t idx, const Vec3& q, Hit& best) const {
    const double d2 = (pts_[idx] - q).squaredNorm();
    if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) best = {idx, d2};
  }

  void search(std::size_t lo, std::size_t hi, int depth, const Vec3& q, Hit& best) const {
    if (hi - lo <= kLeaf) {
      for (std::size_t k = lo; k < hi; ++k) consider(order_[k], q, best);
      return;
    }
    const int axis = depth % 3;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t pivot = order_[mid];
    consider(pivot, q, best);
    const double delta = q[axis] - pts_[pivot][axis];
    const bool left_first = delta <= 0.0;
    if (left_first)
      search(lo, mid, depth + 1, q, best);
    else
      search(mid + 1, hi, depth + 1, q, best);
    // <= keeps equal-distance candidates on the far side reachable for tie-breaks
    if (delta * delta <= best.dist2) {
      if (left_first)
        search(mid + 1, hi, depth + 1, q, best);
      else
        search(lo, mid, depth + 1, q, best);
    }
  }

  std::vector<Vec3> pts_;
  std::vector<std::size_t> order_;
};

}  // namespace vgreg
