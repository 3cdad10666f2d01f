#pragma once

#include "rtdbscan/bvh.hpp"
#include "rtdbscan/geometry.hpp"
#include "rtdbscan/parallel.hpp"

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtdbscan {

inline void check_dense_ids(std::span<const Point> points) {
  if (points.empty()) throw EmptyDatasetError();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].id != i) {
      throw std::invalid_argument("point ids must be dense row indices; row " + std::to_string(i) +
                                  " has id " + std::to_string(points[i].id));
    }
  }
}

inline void check_query_id(std::size_t n, PointId q_id) {
  if (q_id >= n) {
    throw std::out_of_range("query id " + std::to_string(q_id) + " outside [0, " + std::to_string(n) + ")");
  }
}

/// Spheres of radius eps around every point plus the hierarchy over them.
/// Immutable once built; concurrent queries are safe.
class NeighborIndex {
public:
  NeighborIndex(std::vector<Point> points, double eps, const BuildConfig& cfg = {})
      : points_(std::move(points)), eps_(eps) {
    validate_eps(eps_);
    check_dense_ids(points_);
    Stopwatch clock;
    spheres_.reserve(points_.size());
    for (const Point& p : points_) spheres_.push_back(expand_sphere(p, eps_));
    bvh_ = build_bvh(spheres_, cfg);
    build_ms_ = clock.elapsed_ms();
  }

  std::size_t size() const { return points_.size(); }
  double eps() const { return eps_; }
  std::span<const Point> points() const { return points_; }
  std::span<const Sphere> spheres() const { return spheres_; }
  const Bvh& bvh() const { return bvh_; }
  /// Sphere expansion plus hierarchy construction, in milliseconds.
  double build_ms() const { return build_ms_; }

  /// Calls `fn(j)` for every j != q_id within eps of point q_id, in traversal order.
  template <class Fn>
  VisitStats for_each_neighbor(PointId q_id, Fn&& fn) const {
    const Point& q = points_[q_id];
    return query_point(bvh_, q, [&](PointId s) {
      if (s != q_id && point_in_sphere(q, spheres_[s])) fn(s);
    });
  }

  std::size_t count_neighbors(PointId q_id, std::optional<std::size_t> limit, VisitStats* stats) const {
    return count_within(bvh_, points_[q_id], spheres_, q_id, limit, stats);
  }

private:
  std::vector<Point> points_;
  double eps_;
  std::vector<Sphere> spheres_;
  Bvh bvh_;
  double build_ms_ = 0.0;
};

inline NeighborIndex build_index(std::vector<Point> points, double eps, const BuildConfig& cfg = {}) {
  return NeighborIndex(std::move(points), eps, cfg);
}

/// Ids within eps of `q_id`, self excluded, ascending.
inline std::vector<PointId> find_neighborhood(const NeighborIndex& idx, PointId q_id) {
  check_query_id(idx.size(), q_id);
  std::vector<PointId> out;
  idx.for_each_neighbor(q_id, [&](PointId j) { out.push_back(j); });
  std::sort(out.begin(), out.end());
  return out;
}

/// The O(n) scan: ids j != q_id with distance(points[q_id], points[j]) <= eps, ascending.
inline std::vector<PointId> brute_force_neighborhood(std::span<const Point> points, PointId q_id, double eps) {
  check_query_id(points.size(), q_id);
  std::vector<PointId> out;
  const Sphere probe_ball{points[q_id], eps};
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != q_id && point_in_sphere(points[j], probe_ball)) out.push_back(static_cast<PointId>(j));
  }
  return out;
}

/// Neighbor source backed by a linear scan; same interface as NeighborIndex.
/// Each query reports `n` spheres tested and no tree nodes.
class BruteForceNeighbors {
public:
  BruteForceNeighbors(std::vector<Point> points, double eps) : points_(std::move(points)), eps_(eps) {
    validate_eps(eps_);
    check_dense_ids(points_);
  }

  std::size_t size() const { return points_.size(); }
  double eps() const { return eps_; }
  std::span<const Point> points() const { return points_; }
  double build_ms() const { return 0.0; }

  template <class Fn>
  VisitStats for_each_neighbor(PointId q_id, Fn&& fn) const {
    const Point& q = points_[q_id];
    for (std::size_t j = 0; j < points_.size(); ++j) {
      if (j != q_id && distance(q, points_[j]) <= eps_) fn(static_cast<PointId>(j));
    }
    return VisitStats{0, 0, points_.size()};
  }

  std::size_t count_neighbors(PointId q_id, std::optional<std::size_t> limit, VisitStats* stats) const {
    const Point& q = points_[q_id];
    std::size_t count = 0;
    std::size_t j = 0;
    if (!(limit && *limit == 0)) {
      for (; j < points_.size(); ++j) {
        if (j != q_id && distance(q, points_[j]) <= eps_ && ++count == limit.value_or(0)) {
          ++j;
          break;
        }
      }
    }
    if (stats) stats->spheres_tested += j;
    return count;
  }

private:
  std::vector<Point> points_;
  double eps_;
};

/// What the clustering algorithms need from a fixed-radius neighbor oracle.
template <class S>
concept NeighborSource = requires(const S& s, PointId q, std::optional<std::size_t> limit, VisitStats* stats) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.eps() } -> std::convertible_to<double>;
  { s.points() } -> std::convertible_to<std::span<const Point>>;
  { s.build_ms() } -> std::convertible_to<double>;
  { s.for_each_neighbor(q, [](PointId) {}) } -> std::same_as<VisitStats>;
  { s.count_neighbors(q, limit, stats) } -> std::convertible_to<std::size_t>;
};

static_assert(NeighborSource<NeighborIndex>);
static_assert(NeighborSource<BruteForceNeighbors>);

}  // namespace rtdbscan
