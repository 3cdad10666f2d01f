#pragma once

#include "rtdbscan/dbscan.hpp"
#include "rtdbscan/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rtdbscan {

/// One clustering configuration's outcome. Serialized as a `[run]` section of
/// `key=value` lines in a fixed key order; see README for the schema.
struct RunReport {
  std::string command;
  std::string mode;
  std::string source;
  std::size_t n = 0;
  int dims = 2;
  Params params;
  bool early_exit = false;
  bool deterministic = true;
  unsigned threads = 1;

  std::size_t cluster_count = 0;
  std::size_t noise_count = 0;
  std::size_t core_count = 0;
  std::size_t border_count = 0;
  double mean_spheres_tested = 0.0;
  double mean_leaves_visited = 0.0;
  StageTimings timings;

  /// Total-time samples for bench runs (warm-up excluded).
  std::vector<double> samples_total_ms;
  std::optional<bool> equivalent;
  std::size_t differences = 0;

  double mean_total_ms() const {
    if (samples_total_ms.empty()) return timings.total_ms;
    return std::accumulate(samples_total_ms.begin(), samples_total_ms.end(), 0.0) /
           static_cast<double>(samples_total_ms.size());
  }
};

inline RunReport make_report(const DbscanRun& run) {
  RunReport r;
  r.cluster_count = run.labeling.cluster_count;
  r.noise_count = run.labeling.noise_count();
  r.core_count = run.labeling.count(PointClass::Core);
  r.border_count = run.labeling.count(PointClass::Border);
  const TraversalTotals t = run.traversal();
  r.mean_spheres_tested = t.mean_spheres_tested();
  r.mean_leaves_visited = t.mean_leaves_visited();
  r.timings = run.timings;
  return r;
}

namespace detail {

/// Milliseconds with microsecond resolution.
inline std::string format_ms(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", ms);
  return buf;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* format_bool(bool b) { return b ? "true" : "false"; }

}  // namespace detail

inline void write_report(std::ostream& out, const RunReport& r) {
  out << "[run]\n";
  out << "command=" << r.command << '\n';
  out << "mode=" << r.mode << '\n';
  out << "source=" << r.source << '\n';
  out << "n=" << r.n << '\n';
  out << "dims=" << r.dims << '\n';
  out << "eps=" << detail::format_real(r.params.eps) << '\n';
  out << "min_pts=" << r.params.min_pts << '\n';
  out << "early_exit=" << detail::format_bool(r.early_exit) << '\n';
  out << "deterministic=" << detail::format_bool(r.deterministic) << '\n';
  out << "threads=" << r.threads << '\n';
  out << "cluster_count=" << r.cluster_count << '\n';
  out << "noise_count=" << r.noise_count << '\n';
  out << "core_count=" << r.core_count << '\n';
  out << "border_count=" << r.border_count << '\n';
  out << "mean_spheres_tested=" << detail::format_real(r.mean_spheres_tested) << '\n';
  out << "mean_leaves_visited=" << detail::format_real(r.mean_leaves_visited) << '\n';
  if (r.equivalent) {
    out << "equivalent=" << detail::format_bool(*r.equivalent) << '\n';
    out << "differences=" << r.differences << '\n';
  }
  out << "time_index_build_ms=" << detail::format_ms(r.timings.index_build_ms) << '\n';
  out << "time_stage1_ms=" << detail::format_ms(r.timings.stage1_ms) << '\n';
  out << "time_stage2_ms=" << detail::format_ms(r.timings.stage2_ms) << '\n';
  out << "time_total_ms=" << detail::format_ms(r.timings.total_ms) << '\n';
  if (!r.samples_total_ms.empty()) {
    const auto [lo, hi] = std::minmax_element(r.samples_total_ms.begin(), r.samples_total_ms.end());
    out << "repeats=" << r.samples_total_ms.size() << '\n';
    out << "samples_total_ms=";
    for (std::size_t i = 0; i < r.samples_total_ms.size(); ++i) {
      out << (i ? ";" : "") << detail::format_ms(r.samples_total_ms[i]);
    }
    out << '\n';
    out << "mean_total_ms=" << detail::format_ms(r.mean_total_ms()) << '\n';
    out << "min_total_ms=" << detail::format_ms(*lo) << '\n';
    out << "max_total_ms=" << detail::format_ms(*hi) << '\n';
  }
  out << '\n';
}

using ReportSection = std::map<std::string, std::string>;

/// Reads back every `[run]` section as a key/value map.
inline std::vector<ReportSection> parse_reports(std::istream& in) {
  std::vector<ReportSection> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[run]") {
      out.emplace_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || out.empty()) continue;
    out.back()[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

/// Labels CSV: header `id,label`, one row per point, noise spelled NOISE.
inline void write_labels(std::ostream& out, const Labeling& labeling) {
  out << "id,label\n";
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    out << i << ',';
    if (labeling.labels[i] == kNoise) {
      out << "NOISE";
    } else {
      out << labeling.labels[i];
    }
    out << '\n';
  }
}

}  // namespace rtdbscan
