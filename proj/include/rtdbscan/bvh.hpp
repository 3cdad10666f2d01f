#pragma once

#include "rtdbscan/geometry.hpp"
#include "rtdbscan/parallel.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace rtdbscan {

enum class SplitRule {
  MedianLongestAxis,
  BinnedSah,
};

struct BuildConfig {
  std::size_t leaf_capacity = 4;
  SplitRule split_rule = SplitRule::MedianLongestAxis;
};

/// One node of the flat hierarchy. A node with `count > 0` is a leaf owning
/// `sphere_ids[first, first + count)`; otherwise `left`/`right` index its children.
struct BvhNode {
  Aabb box;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t first = 0;
  std::uint32_t count = 0;

  bool is_leaf() const { return count > 0; }

  friend bool operator==(const BvhNode&, const BvhNode&) = default;
};

static_assert(sizeof(BvhNode) == sizeof(Aabb) + 4 * sizeof(std::uint32_t),
              "BvhNode must be padding-free so trees compare bytewise");

struct BuildStats {
  std::size_t node_count = 0;
  std::size_t leaf_count = 0;
  /// Number of node levels; a single-leaf tree has depth 1.
  std::size_t depth = 0;
  double build_ms = 0.0;
};

struct Bvh {
  std::vector<BvhNode> nodes;  // root at index 0
  std::vector<PointId> sphere_ids;
  std::size_t sphere_count = 0;
  std::size_t leaf_capacity = 4;
  BuildStats build_stats;
};

/// Exact traversal counters for one or more queries.
struct VisitStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t leaves_visited = 0;
  std::uint64_t spheres_tested = 0;

  VisitStats& operator+=(const VisitStats& o) {
    nodes_visited += o.nodes_visited;
    leaves_visited += o.leaves_visited;
    spheres_tested += o.spheres_tested;
    return *this;
  }

  friend bool operator==(const VisitStats&, const VisitStats&) = default;
};

namespace detail {

// Traversal keeps a fixed on-stack node stack of kMaxBvhDepth entries. Median
// splits add at most 32 levels, so SAH splitting stops at kSahDepthLimit.
inline constexpr std::size_t kMaxBvhDepth = 96;
inline constexpr std::size_t kSahDepthLimit = 48;
inline constexpr std::size_t kSahBins = 16;

class BvhBuilder {
public:
  BvhBuilder(std::span<const Sphere> spheres, const BuildConfig& cfg, Bvh& out)
      : spheres_(spheres), cfg_(cfg), out_(out) {}

  void build() {
    out_.sphere_ids.resize(spheres_.size());
    for (std::size_t i = 0; i < spheres_.size(); ++i) out_.sphere_ids[i] = static_cast<PointId>(i);
    boxes_.reserve(spheres_.size());
    for (const Sphere& s : spheres_) boxes_.push_back(sphere_aabb(s));
    out_.nodes.reserve(2 * (spheres_.size() / std::max<std::size_t>(cfg_.leaf_capacity, 1)) + 1);
    build_node(0, spheres_.size(), 1);
  }

private:
  std::uint32_t build_node(std::size_t begin, std::size_t end, std::size_t depth) {
    const auto index = static_cast<std::uint32_t>(out_.nodes.size());
    out_.nodes.emplace_back();
    out_.build_stats.depth = std::max(out_.build_stats.depth, depth);

    Aabb box = Aabb::empty();
    Aabb centroids = Aabb::empty();
    for (std::size_t i = begin; i < end; ++i) {
      const PointId id = out_.sphere_ids[i];
      box.merge(boxes_[id]);
      centroids.merge(spheres_[id].center);
    }
    out_.nodes[index].box = box;

    const std::size_t count = end - begin;
    if (count <= cfg_.leaf_capacity) {
      out_.nodes[index].first = static_cast<std::uint32_t>(begin);
      out_.nodes[index].count = static_cast<std::uint32_t>(count);
      ++out_.build_stats.leaf_count;
      return index;
    }

    std::size_t mid = 0;
    if (cfg_.split_rule == SplitRule::BinnedSah && depth < kSahDepthLimit) {
      mid = split_sah(begin, end, centroids);
    }
    if (mid <= begin || mid >= end) mid = split_median(begin, end, centroids);

    const std::uint32_t left = build_node(begin, mid, depth + 1);
    const std::uint32_t right = build_node(mid, end, depth + 1);
    out_.nodes[index].left = left;
    out_.nodes[index].right = right;
    return index;
  }

  std::size_t split_median(std::size_t begin, std::size_t end, const Aabb& centroids) {
    auto first = out_.sphere_ids.begin() + static_cast<std::ptrdiff_t>(begin);
    auto last = out_.sphere_ids.begin() + static_cast<std::ptrdiff_t>(end);
    const std::size_t mid = begin + (end - begin) / 2;
    auto nth = out_.sphere_ids.begin() + static_cast<std::ptrdiff_t>(mid);

    if (centroids.min == centroids.max) {
      // All centers coincide: split by id so duplicate-heavy data still terminates.
      std::nth_element(first, nth, last);
      return mid;
    }
    const int axis = centroids.longest_axis();
    std::nth_element(first, nth, last, [&](PointId a, PointId b) {
      const double ca = spheres_[a].center[axis];
      const double cb = spheres_[b].center[axis];
      return ca < cb || (ca == cb && a < b);
    });
    return mid;
  }

  // Returns begin when no useful split exists; the caller then falls back to the median.
  std::size_t split_sah(std::size_t begin, std::size_t end, const Aabb& centroids) {
    const int axis = centroids.longest_axis();
    const double lo = centroids.min[axis];
    const double extent = centroids.max[axis] - lo;
    if (!(extent > 0.0)) return begin;

    const double scale = static_cast<double>(kSahBins) / extent;
    auto bin_of = [&](PointId id) {
      const auto b = static_cast<std::size_t>((spheres_[id].center[axis] - lo) * scale);
      return std::min(b, kSahBins - 1);
    };

    std::array<Aabb, kSahBins> bin_box;
    std::array<std::size_t, kSahBins> bin_count{};
    bin_box.fill(Aabb::empty());
    for (std::size_t i = begin; i < end; ++i) {
      const PointId id = out_.sphere_ids[i];
      const std::size_t b = bin_of(id);
      bin_box[b].merge(boxes_[id]);
      ++bin_count[b];
    }

    std::array<double, kSahBins - 1> left_cost{};
    Aabb acc = Aabb::empty();
    std::size_t n = 0;
    for (std::size_t b = 0; b + 1 < kSahBins; ++b) {
      acc.merge(bin_box[b]);
      n += bin_count[b];
      left_cost[b] = acc.surface_area() * static_cast<double>(n);
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_bin = kSahBins;
    acc = Aabb::empty();
    n = 0;
    for (std::size_t b = kSahBins - 1; b > 0; --b) {
      acc.merge(bin_box[b]);
      n += bin_count[b];
      const std::size_t left_n = (end - begin) - n;
      if (n == 0 || left_n == 0) continue;
      const double cost = left_cost[b - 1] + acc.surface_area() * static_cast<double>(n);
      if (cost < best) {
        best = cost;
        best_bin = b;
      }
    }
    if (best_bin == kSahBins) return begin;

    auto first = out_.sphere_ids.begin() + static_cast<std::ptrdiff_t>(begin);
    auto last = out_.sphere_ids.begin() + static_cast<std::ptrdiff_t>(end);
    auto split = std::stable_partition(first, last, [&](PointId id) { return bin_of(id) < best_bin; });
    return static_cast<std::size_t>(split - out_.sphere_ids.begin());
  }

  std::span<const Sphere> spheres_;
  const BuildConfig& cfg_;
  Bvh& out_;
  std::vector<Aabb> boxes_;
};

}  // namespace detail

/// Builds a hierarchy over `spheres`; sphere ids are their indices in the span.
///
/// Construction is top-down: each node splits its spheres at the median center
/// along the longest axis of the center bounds (or at the cheapest binned
/// surface-area split when configured). The result depends only on the input
/// and the config.
inline Bvh build_bvh(std::span<const Sphere> spheres, const BuildConfig& cfg = {}) {
  if (spheres.empty()) throw EmptyDatasetError();
  if (cfg.leaf_capacity < 1) throw std::invalid_argument("leaf_capacity must be at least 1");
  if (spheres.size() > std::numeric_limits<PointId>::max()) {
    throw std::invalid_argument("too many spheres for 32-bit ids");
  }
  const double radius = spheres.front().radius;
  for (const Sphere& s : spheres) {
    if (s.radius != radius) throw std::invalid_argument("all spheres must share one radius");
  }

  Stopwatch clock;
  Bvh bvh;
  bvh.sphere_count = spheres.size();
  bvh.leaf_capacity = cfg.leaf_capacity;
  detail::BvhBuilder(spheres, cfg, bvh).build();
  bvh.build_stats.node_count = bvh.nodes.size();
  bvh.build_stats.build_ms = clock.elapsed_ms();
  return bvh;
}

/// Visits every sphere id stored in a leaf whose box contains `q`, descending
/// only through boxes that contain `q`.
///
/// `visit(PointId)` may return `bool`; returning false ends the traversal.
template <class Visitor>
VisitStats query_point(const Bvh& bvh, const Point& q, Visitor&& visit) {
  VisitStats stats;
  if (bvh.nodes.empty()) return stats;

  std::array<std::uint32_t, detail::kMaxBvhDepth + 2> stack;
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const BvhNode& node = bvh.nodes[stack[--top]];
    ++stats.nodes_visited;
    if (!point_in_aabb(q, node.box)) continue;
    if (!node.is_leaf()) {
      stack[top++] = node.right;
      stack[top++] = node.left;
      continue;
    }
    ++stats.leaves_visited;
    const std::uint32_t end = node.first + node.count;
    for (std::uint32_t i = node.first; i < end; ++i) {
      ++stats.spheres_tested;
      if constexpr (std::is_same_v<std::invoke_result_t<Visitor&, PointId>, bool>) {
        if (!visit(bvh.sphere_ids[i])) return stats;
      } else {
        visit(bvh.sphere_ids[i]);
      }
    }
  }
  return stats;
}

/// Counts spheres other than `exclude_id` that contain `q`.
///
/// With a limit the traversal stops as soon as the count reaches it, so the
/// result is then only meaningful as a comparison against the limit.
inline std::size_t count_within(const Bvh& bvh, const Point& q, std::span<const Sphere> spheres,
                                PointId exclude_id, std::optional<std::size_t> limit = std::nullopt,
                                VisitStats* stats = nullptr) {
  std::size_t count = 0;
  if (limit && *limit == 0) return 0;
  const VisitStats s = query_point(bvh, q, [&](PointId id) {
    if (id != exclude_id && point_in_sphere(q, spheres[id])) ++count;
    return !(limit && count >= *limit);
  });
  if (stats) *stats += s;
  return count;
}

enum class ViolationKind {
  Structure,
  Containment,
  Tightness,
  Coverage,
  LeafSize,
};

struct Violation {
  ViolationKind kind;
  std::size_t node;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::size_t count(ViolationKind kind) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [kind](const Violation& v) { return v.kind == kind; }));
  }
};

/// Checks every structural invariant of `bvh` against the spheres it was built over.
inline ValidationReport validate_bvh(const Bvh& bvh, std::span<const Sphere> spheres) {
  ValidationReport report;
  auto fail = [&](ViolationKind kind, std::size_t node, std::string msg) {
    report.violations.push_back({kind, node, std::move(msg)});
  };

  if (bvh.sphere_count != spheres.size()) {
    fail(ViolationKind::Coverage, 0,
         "sphere_count " + std::to_string(bvh.sphere_count) + " != " + std::to_string(spheres.size()));
  }
  if (bvh.nodes.empty()) {
    fail(ViolationKind::Structure, 0, "tree has no root");
    return report;
  }

  const std::size_t n_nodes = bvh.nodes.size();
  std::vector<std::uint32_t> parents_seen(n_nodes, 0);
  std::vector<std::size_t> id_seen(spheres.size(), 0);
  std::vector<std::uint32_t> stack{0};
  parents_seen[0] = 1;  // the root counts as reached once

  while (!stack.empty()) {
    const std::uint32_t index = stack.back();
    stack.pop_back();
    const BvhNode& node = bvh.nodes[index];
    if (!node.box.valid()) fail(ViolationKind::Structure, index, "inverted box");

    if (node.is_leaf()) {
      if (node.count > bvh.leaf_capacity) {
        fail(ViolationKind::LeafSize, index,
             "leaf holds " + std::to_string(node.count) + " > capacity " + std::to_string(bvh.leaf_capacity));
      }
      if (static_cast<std::size_t>(node.first) + node.count > bvh.sphere_ids.size()) {
        fail(ViolationKind::Structure, index, "leaf range exceeds sphere id array");
        continue;
      }
      Aabb tight = Aabb::empty();
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const PointId id = bvh.sphere_ids[i];
        if (id >= spheres.size()) {
          fail(ViolationKind::Coverage, index, "sphere id " + std::to_string(id) + " out of range");
          continue;
        }
        ++id_seen[id];
        const Aabb sb = sphere_aabb(spheres[id]);
        if (!node.box.contains(sb)) {
          fail(ViolationKind::Containment, index, "leaf box misses sphere " + std::to_string(id));
        }
        tight.merge(sb);
      }
      if (!(tight == node.box) && node.box.contains(tight)) {
        fail(ViolationKind::Tightness, index, "leaf box is not the union of its sphere boxes");
      }
      continue;
    }

    bool children_ok = true;
    for (const std::uint32_t child : {node.left, node.right}) {
      if (child >= n_nodes || child == 0) {
        fail(ViolationKind::Structure, index, "child index " + std::to_string(child) + " invalid");
        children_ok = false;
        continue;
      }
      if (++parents_seen[child] > 1) {
        fail(ViolationKind::Structure, child, "node reached more than once (shared child or cycle)");
        children_ok = false;
        continue;
      }
      stack.push_back(child);
    }
    if (!children_ok) continue;

    const Aabb& lb = bvh.nodes[node.left].box;
    const Aabb& rb = bvh.nodes[node.right].box;
    if (!node.box.contains(lb) || !node.box.contains(rb)) {
      fail(ViolationKind::Containment, index, "internal box does not contain its children");
    } else {
      Aabb tight = lb;
      tight.merge(rb);
      if (!(tight == node.box)) fail(ViolationKind::Tightness, index, "internal box is not the union of its children");
    }
  }

  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (parents_seen[i] == 0) fail(ViolationKind::Structure, i, "node unreachable from root");
  }
  for (std::size_t id = 0; id < id_seen.size(); ++id) {
    if (id_seen[id] != 1) {
      fail(ViolationKind::Coverage, 0,
           "sphere " + std::to_string(id) + " appears " + std::to_string(id_seen[id]) + " times");
    }
  }
  return report;
}

}  // namespace rtdbscan
