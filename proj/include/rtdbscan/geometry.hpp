#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace rtdbscan {

/// Dense point identity, equal to the point's row index in its dataset.
using PointId = std::uint32_t;

/// Raised when an operation receives a dataset with no points.
class EmptyDatasetError : public std::invalid_argument {
public:
  EmptyDatasetError() : std::invalid_argument("dataset is empty") {}
};

/// A datum with stable integer identity. 2D data lives at z == 0.
struct Point {
  PointId id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend bool operator==(const Point&, const Point&) = default;
};

/// Euclidean distance, always in three dimensions.
inline double distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// The eps-ball around a point. Radius is shared by every sphere of a run.
struct Sphere {
  Point center;
  double radius = 0.0;

  friend bool operator==(const Sphere&, const Sphere&) = default;
};

struct Aabb {
  std::array<double, 3> min{};
  std::array<double, 3> max{};

  /// The identity for `merge`: contains nothing.
  static Aabb empty() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return Aabb{{inf, inf, inf}, {-inf, -inf, -inf}};
  }

  bool valid() const { return min[0] <= max[0] && min[1] <= max[1] && min[2] <= max[2]; }

  void merge(const Aabb& other) {
    for (int k = 0; k < 3; ++k) {
      min[k] = std::fmin(min[k], other.min[k]);
      max[k] = std::fmax(max[k], other.max[k]);
    }
  }

  void merge(const Point& p) {
    for (int k = 0; k < 3; ++k) {
      min[k] = std::fmin(min[k], p[k]);
      max[k] = std::fmax(max[k], p[k]);
    }
  }

  bool contains(const Aabb& inner) const {
    for (int k = 0; k < 3; ++k) {
      if (inner.min[k] < min[k] || inner.max[k] > max[k]) return false;
    }
    return true;
  }

  double surface_area() const {
    if (!valid()) return 0.0;
    const double dx = max[0] - min[0];
    const double dy = max[1] - min[1];
    const double dz = max[2] - min[2];
    return 2.0 * (dx * dy + dy * dz + dz * dx);
  }

  int longest_axis() const {
    const double dx = max[0] - min[0];
    const double dy = max[1] - min[1];
    const double dz = max[2] - min[2];
    if (dx >= dy && dx >= dz) return 0;
    return dy >= dz ? 1 : 2;
  }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Clustering parameters. `min_pts` counts neighbors excluding the point itself.
struct Params {
  double eps = 0.0;
  std::size_t min_pts = 1;

  void validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
      throw std::invalid_argument("eps must be a finite positive number, got " + std::to_string(eps));
    }
    if (min_pts < 1) throw std::invalid_argument("min_pts must be at least 1");
  }
};

inline void validate_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("eps must be a finite positive number, got " + std::to_string(eps));
  }
}

inline Sphere expand_sphere(const Point& p, double eps) {
  validate_eps(eps);
  return Sphere{p, eps};
}

inline Aabb sphere_aabb(const Sphere& s) {
  const double r = s.radius;
  return Aabb{{s.center.x - r, s.center.y - r, s.center.z - r},
              {s.center.x + r, s.center.y + r, s.center.z + r}};
}

// A zero-length ray hits exactly the volumes that contain its origin, so both
// intersection tests reduce to closed containment.

inline bool point_in_aabb(const Point& q, const Aabb& box) {
  return box.min[0] <= q.x && q.x <= box.max[0] && box.min[1] <= q.y && q.y <= box.max[1] &&
         box.min[2] <= q.z && q.z <= box.max[2];
}

inline bool point_in_sphere(const Point& q, const Sphere& s) {
  return distance(q, s.center) <= s.radius;
}

}  // namespace rtdbscan
