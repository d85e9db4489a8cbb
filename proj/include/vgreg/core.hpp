// core.hpp - shared vocabulary: points, error types, deterministic RNG.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vgreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Not enough (or collinear / coplanar) points for a geometric fit.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// A dense materialization was requested above the configured size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A graph or assignment violates one of its structural invariants.
class InvariantError : public Error {
 public:
  using Error::Error;
};

inline bool is_finite(const Vec3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Sum of consecutive point distances.
inline double arc_length(std::span<const Vec3> pts) {
  double total = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) total += (pts[k] - pts[k - 1]).norm();
  return total;
}

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  [[nodiscard]] Vec3 extent() const { return hi - lo; }
  [[nodiscard]] double diagonal() const { return extent().norm(); }
  [[nodiscard]] bool contains(const Vec3& p, double slack = 0.0) const {
    return (p.array() >= lo.array() - slack).all() && (p.array() <= hi.array() + slack).all();
  }

  static Box of(std::span<const Vec3> pts) {
    Box b;
    if (pts.empty()) return b;
    b.lo = b.hi = pts.front();
    for (const auto& p : pts) {
      b.lo = b.lo.cwiseMin(p);
      b.hi = b.hi.cwiseMax(p);
    }
    return b;
  }
};

/// Deterministic splitmix64 generator. Doubles are built from raw 64-bit
/// words, so streams do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed ^ mix(stream + 0x9E3779B97F4A7C15ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw ArgumentError("Rng::index: empty range");
    // Lemire's multiply-shift; the tiny bias is irrelevant at our range sizes.
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double normal() {
    // Box-Muller, no caching so the stream position is easy to reason about.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec3 unit_vector() {
    Vec3 v(normal(), normal(), normal());
    double n = v.norm();
    while (n < 1e-12) {
      v = Vec3(normal(), normal(), normal());
      n = v.norm();
    }
    return v / n;
  }

  /// Uniform in the unit ball.
  Vec3 in_unit_ball() { return unit_vector() * std::cbrt(uniform()); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace vgreg
