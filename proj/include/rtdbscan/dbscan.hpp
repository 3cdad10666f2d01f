#pragma once

#include "rtdbscan/bvh.hpp"
#include "rtdbscan/disjoint_set.hpp"
#include "rtdbscan/geometry.hpp"
#include "rtdbscan/neighbor.hpp"
#include "rtdbscan/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rtdbscan {

/// Label value for points that belong to no cluster.
inline constexpr std::int64_t kNoise = -1;

enum class PointClass : std::uint8_t {
  Core,
  Border,
  Noise,
};

/// Per-point clustering result. Cluster labels are the smallest member id once
/// canonicalized.
struct Labeling {
  std::vector<std::int64_t> labels;
  std::vector<PointClass> classes;
  std::size_t cluster_count = 0;

  std::size_t size() const { return labels.size(); }

  std::size_t noise_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
  }

  std::size_t count(PointClass c) const {
    return static_cast<std::size_t>(std::count(classes.begin(), classes.end(), c));
  }

  friend bool operator==(const Labeling&, const Labeling&) = default;
};

/// Relabels every cluster with its smallest member id and recounts clusters.
inline Labeling canonicalize_labels(Labeling labeling) {
  std::unordered_map<std::int64_t, std::int64_t> smallest;
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    const std::int64_t l = labeling.labels[i];
    if (l == kNoise) continue;
    // Ids are visited in ascending order, so the first hit is the minimum.
    smallest.try_emplace(l, static_cast<std::int64_t>(i));
  }
  for (auto& l : labeling.labels) {
    if (l != kNoise) l = smallest.at(l);
  }
  labeling.cluster_count = smallest.size();
  return labeling;
}

/// Aggregate traversal counters over a batch of neighbor queries.
struct TraversalTotals {
  std::uint64_t queries = 0;
  VisitStats sum;

  TraversalTotals& operator+=(const TraversalTotals& o) {
    queries += o.queries;
    sum += o.sum;
    return *this;
  }

  void add(const VisitStats& s) {
    ++queries;
    sum += s;
  }

  double mean_spheres_tested() const {
    return queries ? static_cast<double>(sum.spheres_tested) / static_cast<double>(queries) : 0.0;
  }
  double mean_leaves_visited() const {
    return queries ? static_cast<double>(sum.leaves_visited) / static_cast<double>(queries) : 0.0;
  }
};

namespace detail {

template <NeighborSource Source>
void check_params(const Source& source, const Params& params) {
  params.validate();
  if (source.size() == 0) throw EmptyDatasetError();
  if (source.eps() != params.eps) {
    throw std::invalid_argument("index was built for eps " + std::to_string(source.eps()) + " but params request " +
                                std::to_string(params.eps));
  }
}

template <NeighborSource Source>
std::vector<PointId> sorted_neighbors(const Source& source, PointId p, TraversalTotals& traversal) {
  std::vector<PointId> out;
  traversal.add(source.for_each_neighbor(p, [&](PointId j) { out.push_back(j); }));
  std::sort(out.begin(), out.end());
  return out;
}

/// Per-slot atomic test-and-set flags.
class ClaimFlags {
public:
  explicit ClaimFlags(std::size_t n) : flags_(std::make_unique<std::atomic<bool>[]>(n)) {
    for (std::size_t i = 0; i < n; ++i) flags_[i].store(false, std::memory_order_relaxed);
  }

  /// True for exactly one caller per slot.
  bool claim(std::size_t i) { return !flags_[i].exchange(true, std::memory_order_acq_rel); }
  bool claimed(std::size_t i) const { return flags_[i].load(std::memory_order_acquire); }

private:
  std::unique_ptr<std::atomic<bool>[]> flags_;
};

}  // namespace detail

/// Sequential seed-expansion DBSCAN in ascending id order; the reference oracle.
///
/// Counts exclude the point itself, so a point is core when it has at least
/// `min_pts` other points within eps. Expansion follows the textbook loop:
/// every unassigned or noise neighbor of a core point joins the cluster, and
/// the neighbors of those that are themselves core are appended to the seed set.
template <NeighborSource Source>
Labeling classic_dbscan(const Source& source, const Params& params, TraversalTotals* traversal = nullptr) {
  detail::check_params(source, params);
  constexpr std::int64_t kUnassigned = -2;
  const std::size_t n = source.size();

  TraversalTotals totals;
  std::vector<std::int64_t> labels(n, kUnassigned);
  std::vector<std::uint8_t> core(n, 0);
  std::vector<std::int64_t> seeded_for(n, kUnassigned);
  std::vector<PointId> seeds;
  std::int64_t next_cluster = 0;

  for (PointId p = 0; p < n; ++p) {
    if (labels[p] != kUnassigned) continue;
    std::vector<PointId> neighbors = detail::sorted_neighbors(source, p, totals);
    if (neighbors.size() < params.min_pts) {
      labels[p] = kNoise;
      continue;
    }
    core[p] = 1;
    const std::int64_t cluster = next_cluster++;
    labels[p] = cluster;
    seeded_for[p] = cluster;
    seeds.clear();
    for (PointId q : neighbors) {
      seeded_for[q] = cluster;
      seeds.push_back(q);
    }
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const PointId q = seeds[k];
      if (labels[q] != kUnassigned && labels[q] != kNoise) continue;
      labels[q] = cluster;
      std::vector<PointId> more = detail::sorted_neighbors(source, q, totals);
      if (more.size() < params.min_pts) continue;
      core[q] = 1;
      for (PointId r : more) {
        if (seeded_for[r] == cluster) continue;
        seeded_for[r] = cluster;
        seeds.push_back(r);
      }
    }
  }

  Labeling out;
  out.labels = std::move(labels);
  out.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.classes[i] = core[i] ? PointClass::Core : (out.labels[i] == kNoise ? PointClass::Noise : PointClass::Border);
  }
  if (traversal) *traversal += totals;
  return canonicalize_labels(std::move(out));
}

inline Labeling classic_dbscan(std::vector<Point> points, const Params& params, const BuildConfig& cfg = {}) {
  params.validate();
  const NeighborIndex index(std::move(points), params.eps, cfg);
  return classic_dbscan(index, params);
}

struct CoreFlags {
  std::vector<std::uint8_t> core;
  /// Self-excluded neighbor counts. Exact only when `counts_exact`; otherwise
  /// capped at min_pts and usable only as a threshold comparison.
  std::vector<std::size_t> counts;
  bool counts_exact = true;
  TraversalTotals traversal;

  bool is_core(std::size_t i) const { return core[i] != 0; }
};

/// Stage one: flags every point with at least `min_pts` neighbors.
template <NeighborSource Source>
CoreFlags identify_core_points(const Source& source, const Params& params, bool early_exit, unsigned threads = 1) {
  detail::check_params(source, params);
  const std::size_t n = source.size();
  CoreFlags out;
  out.core.assign(n, 0);
  out.counts.assign(n, 0);
  out.counts_exact = !early_exit;

  const std::optional<std::size_t> limit = early_exit ? std::optional<std::size_t>(params.min_pts) : std::nullopt;
  std::vector<TraversalTotals> per_worker(worker_slots(threads));
  parallel_for_chunks(n, threads, [&](unsigned worker, std::size_t begin, std::size_t end) {
    TraversalTotals& local = per_worker[worker];
    for (std::size_t i = begin; i < end; ++i) {
      VisitStats stats;
      const std::size_t count = source.count_neighbors(static_cast<PointId>(i), limit, &stats);
      local.add(stats);
      out.counts[i] = count;
      out.core[i] = count >= params.min_pts;
    }
  });
  for (const auto& t : per_worker) out.traversal += t;
  return out;
}

/// Re-thresholds exact counts from an earlier stage one for a different min_pts.
inline std::vector<std::uint8_t> core_flags_from_counts(const CoreFlags& flags, std::size_t min_pts) {
  if (!flags.counts_exact) {
    throw std::logic_error("counts from an early-exit run cannot be re-thresholded");
  }
  std::vector<std::uint8_t> core(flags.counts.size());
  for (std::size_t i = 0; i < core.size(); ++i) core[i] = flags.counts[i] >= min_pts;
  return core;
}

struct ClusterForest {
  DisjointSet sets;
  /// Non-core points attached to some core point's set.
  std::vector<std::uint8_t> attached;
  TraversalTotals traversal;
};

/// Stage two: joins core points within eps of each other and attaches every
/// reachable non-core point to exactly one cluster.
///
/// A non-core neighbor is attached by whichever core point claims it first.
/// With `deterministic` the points are processed single-threaded in ascending
/// id order, which makes "first" the lowest-id core neighbor.
template <NeighborSource Source>
ClusterForest form_clusters(const Source& source, const CoreFlags& flags, const Params& params,
                            unsigned threads = 1, bool deterministic = true) {
  detail::check_params(source, params);
  const std::size_t n = source.size();
  if (flags.core.size() != n) throw std::invalid_argument("core flags do not match the dataset size");

  DisjointSet sets(n);
  detail::ClaimFlags claims(n);
  const unsigned workers = deterministic ? 1u : threads;
  std::vector<TraversalTotals> per_worker(worker_slots(workers));

  parallel_for_chunks(n, workers, [&](unsigned worker, std::size_t begin, std::size_t end) {
    TraversalTotals& local = per_worker[worker];
    for (std::size_t i = begin; i < end; ++i) {
      if (!flags.is_core(i)) continue;
      const auto p = static_cast<PointId>(i);
      local.add(source.for_each_neighbor(p, [&](PointId q) {
        if (flags.is_core(q)) {
          // Adjacency is symmetric, so the pair is also seen from q; one union suffices.
          if (q > p) sets.unite(p, q);
        } else if (claims.claim(q)) {
          sets.unite(p, q);
        }
      }));
    }
  }, 64);

  ClusterForest out{std::move(sets), std::vector<std::uint8_t>(n, 0), {}};
  for (std::size_t i = 0; i < n; ++i) out.attached[i] = claims.claimed(i);
  for (const auto& t : per_worker) out.traversal += t;
  return out;
}

/// Turns the stage-two forest into a canonical labeling. Sets without a core
/// point are noise.
inline Labeling assemble_labeling(const CoreFlags& flags, const ClusterForest& forest) {
  const std::size_t n = flags.core.size();
  const std::vector<std::uint32_t> roots = forest.sets.flatten();
  std::vector<std::uint8_t> root_has_core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (flags.is_core(i)) root_has_core[roots[i]] = 1;
  }
  Labeling out;
  out.labels.resize(n);
  out.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool clustered = root_has_core[roots[i]] != 0;
    out.labels[i] = clustered ? static_cast<std::int64_t>(roots[i]) : kNoise;
    out.classes[i] = flags.is_core(i) ? PointClass::Core : (clustered ? PointClass::Border : PointClass::Noise);
  }
  return canonicalize_labels(std::move(out));
}

struct RtOptions {
  /// Stop each stage-one count once min_pts neighbors are confirmed.
  bool early_exit = false;
  /// Run stage two single-threaded in ascending id order.
  bool deterministic = true;
  unsigned threads = 1;
  BuildConfig bvh;
};

/// Wall-clock breakdown of one clustering run, in milliseconds.
struct StageTimings {
  double index_build_ms = 0.0;
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
  double assembly_ms = 0.0;
  double total_ms = 0.0;
};

struct DbscanRun {
  Labeling labeling;
  StageTimings timings;
  TraversalTotals stage1;
  TraversalTotals stage2;

  TraversalTotals traversal() const {
    TraversalTotals t = stage1;
    t += stage2;
    return t;
  }
};

/// The two-stage union-find clustering over any neighbor source. Index build
/// time is taken from the source.
template <NeighborSource Source>
DbscanRun two_stage_dbscan(const Source& source, const Params& params, const RtOptions& options = {}) {
  detail::check_params(source, params);
  DbscanRun run;
  run.timings.index_build_ms = source.build_ms();
  const unsigned threads = options.deterministic ? 1u : options.threads;

  Stopwatch clock;
  CoreFlags flags = identify_core_points(source, params, options.early_exit, threads);
  run.timings.stage1_ms = clock.elapsed_ms();
  run.stage1 = flags.traversal;

  clock.reset();
  ClusterForest forest = form_clusters(source, flags, params, threads, options.deterministic);
  run.timings.stage2_ms = clock.elapsed_ms();
  run.stage2 = forest.traversal;

  clock.reset();
  run.labeling = assemble_labeling(flags, forest);
  run.timings.assembly_ms = clock.elapsed_ms();
  run.timings.total_ms =
      run.timings.index_build_ms + run.timings.stage1_ms + run.timings.stage2_ms + run.timings.assembly_ms;
  return run;
}

/// Builds the sphere index over `points` and runs the two-stage clustering on it.
inline DbscanRun rt_dbscan(std::vector<Point> points, const Params& params, const RtOptions& options = {}) {
  params.validate();
  Stopwatch total;
  const NeighborIndex index(std::move(points), params.eps, options.bvh);
  DbscanRun run = two_stage_dbscan(index, params, options);
  run.timings.total_ms = std::max(run.timings.total_ms, total.elapsed_ms());
  return run;
}

enum class DifferenceKind {
  CoreFlag,
  CorePartition,
  NoiseSet,
  BorderAssignment,
  Inconsistent,
};

struct Difference {
  DifferenceKind kind;
  std::size_t point;
  std::string message;
};

struct EquivalenceReport {
  std::vector<Difference> differences;

  bool pass() const { return differences.empty(); }

  std::size_t count(DifferenceKind kind) const {
    return static_cast<std::size_t>(std::count_if(differences.begin(), differences.end(),
                                                  [kind](const Difference& d) { return d.kind == kind; }));
  }
};

/// Checks that two labelings are the same DBSCAN clustering up to cluster
/// renaming and the choice of cluster for border points.
template <NeighborSource Source>
EquivalenceReport compare_clusterings(const Labeling& a, const Labeling& b, const Source& source,
                                      const Params& params) {
  detail::check_params(source, params);
  const std::size_t n = source.size();
  if (a.labels.size() != n || b.labels.size() != n || a.classes.size() != n || b.classes.size() != n) {
    throw std::invalid_argument("labelings do not cover the same dataset");
  }
  EquivalenceReport report;
  auto note = [&](DifferenceKind kind, std::size_t point, std::string msg) {
    report.differences.push_back({kind, point, std::move(msg)});
  };

  for (const Labeling* l : {&a, &b}) {
    const char* which = l == &a ? "a" : "b";
    for (std::size_t i = 0; i < n; ++i) {
      if ((l->labels[i] == kNoise) != (l->classes[i] == PointClass::Noise)) {
        note(DifferenceKind::Inconsistent, i, std::string(which) + ": noise label and noise class disagree");
      }
    }
  }

  std::unordered_map<std::int64_t, std::int64_t> a_to_b;
  std::unordered_map<std::int64_t, std::int64_t> b_to_a;
  for (std::size_t i = 0; i < n; ++i) {
    const bool core_a = a.classes[i] == PointClass::Core;
    const bool core_b = b.classes[i] == PointClass::Core;
    if (core_a != core_b) {
      note(DifferenceKind::CoreFlag, i, "core in " + std::string(core_a ? "a" : "b") + " only");
      continue;
    }
    if ((a.labels[i] == kNoise) != (b.labels[i] == kNoise)) {
      note(DifferenceKind::NoiseSet, i, "noise in " + std::string(a.labels[i] == kNoise ? "a" : "b") + " only");
    }
    if (!core_a) continue;
    const auto [ita, fresh_a] = a_to_b.try_emplace(a.labels[i], b.labels[i]);
    const auto [itb, fresh_b] = b_to_a.try_emplace(b.labels[i], a.labels[i]);
    if (ita->second != b.labels[i] || itb->second != a.labels[i]) {
      note(DifferenceKind::CorePartition, i,
           "core point in clusters a:" + std::to_string(a.labels[i]) + " b:" + std::to_string(b.labels[i]) +
               " breaks the a<->b cluster correspondence");
    }
  }

  for (const Labeling* l : {&a, &b}) {
    const char* which = l == &a ? "a" : "b";
    for (std::size_t i = 0; i < n; ++i) {
      if (l->classes[i] != PointClass::Border) continue;
      bool supported = false;
      source.for_each_neighbor(static_cast<PointId>(i), [&](PointId j) {
        if (l->classes[j] == PointClass::Core && l->labels[j] == l->labels[i]) supported = true;
      });
      if (!supported) {
        note(DifferenceKind::BorderAssignment, i,
             std::string(which) + ": border point in cluster " + std::to_string(l->labels[i]) +
                 " has no core neighbor in that cluster");
      }
    }
  }
  return report;
}

}  // namespace rtdbscan
