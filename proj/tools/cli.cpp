#include "cli.hpp"

#include "rtdbscan/data.hpp"
#include "rtdbscan/dbscan.hpp"
#include "rtdbscan/neighbor.hpp"
#include "rtdbscan/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rtdbscan::cli {
namespace {

struct Options {
  std::string input;
  std::string generate;
  std::uint64_t seed = 1;
  int dims = 2;
  std::vector<std::size_t> columns;
  bool header = false;
  std::optional<std::size_t> limit;

  std::vector<double> eps;
  std::vector<std::size_t> min_pts;
  std::vector<std::string> modes{"rt"};
  bool early_exit = false;
  bool deterministic = false;
  unsigned threads = 1;
  std::size_t leaf_capacity = 4;
  std::string split = "median";
  std::size_t repeats = 10;

  std::string out_labels;
  std::string out_report;
};

Dataset load_dataset(const Options& o) {
  if (o.input.empty() == o.generate.empty()) {
    throw std::invalid_argument("exactly one of --input or --generate is required");
  }
  if (!o.generate.empty()) {
    Dataset ds = generate(parse_generator_spec(o.generate), o.seed);
    ds.source = o.generate + ";seed=" + std::to_string(o.seed);
    if (o.limit && ds.points.size() > *o.limit) ds.points.resize(*o.limit);
    return ds;
  }
  CsvOptions csv;
  csv.dims = o.dims;
  csv.columns = o.columns;
  csv.has_header = o.header;
  csv.limit = o.limit;
  return load_csv(o.input, csv);
}

RtOptions rt_options(const Options& o) {
  RtOptions r;
  r.early_exit = o.early_exit;
  r.threads = std::max(1u, o.threads);
  r.deterministic = o.deterministic || r.threads <= 1;
  r.bvh.leaf_capacity = o.leaf_capacity;
  r.bvh.split_rule = o.split == "sah" ? SplitRule::BinnedSah : SplitRule::MedianLongestAxis;
  return r;
}

// Runs one (mode, eps, min_pts) cell end to end, including index construction.
DbscanRun run_mode(const std::string& mode, const Dataset& ds, const Params& params, const RtOptions& opts) {
  if (mode == "rt") return rt_dbscan(ds.points, params, opts);
  if (mode == "brute") {
    Stopwatch total;
    const BruteForceNeighbors source(ds.points, params.eps);
    DbscanRun run = two_stage_dbscan(source, params, opts);
    run.timings.total_ms = std::max(run.timings.total_ms, total.elapsed_ms());
    return run;
  }
  // classic: the sequential expansion is reported as stage 1.
  Stopwatch total;
  const NeighborIndex index(ds.points, params.eps, opts.bvh);
  DbscanRun run;
  run.timings.index_build_ms = index.build_ms();
  Stopwatch clock;
  run.labeling = classic_dbscan(index, params, &run.stage1);
  run.timings.stage1_ms = clock.elapsed_ms();
  run.timings.total_ms = std::max(run.timings.index_build_ms + run.timings.stage1_ms, total.elapsed_ms());
  return run;
}

RunReport describe(const std::string& command, const std::string& mode, const Dataset& ds, const Params& params,
                   const RtOptions& opts, const DbscanRun& run) {
  RunReport r = make_report(run);
  r.command = command;
  r.mode = mode;
  r.source = ds.source;
  r.n = ds.size();
  r.dims = ds.dims;
  r.params = params;
  r.early_exit = opts.early_exit;
  r.deterministic = opts.deterministic;
  r.threads = opts.threads;
  return r;
}

class ReportSink {
public:
  ReportSink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write report '" + path + "'");
    }
    out_ = path.empty() ? &fallback : &file_;
  }

  void write(const RunReport& r) {
    write_report(*out_, r);
    out_->flush();
  }

private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

void save_labels(const std::string& path, const Labeling& labeling) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write labels '" + path + "'");
  write_labels(out, labeling);
}

Params single_params(const Options& o) {
  if (o.eps.size() != 1 || o.min_pts.size() != 1) {
    throw std::invalid_argument("this command takes exactly one --eps and one --minpts value");
  }
  Params p{o.eps.front(), o.min_pts.front()};
  p.validate();
  return p;
}

int cmd_cluster(const Options& o, std::ostream& out) {
  if (o.modes.size() != 1) throw std::invalid_argument("cluster takes exactly one --mode");
  const Dataset ds = load_dataset(o);
  const Params params = single_params(o);
  const RtOptions opts = rt_options(o);
  const DbscanRun run = run_mode(o.modes.front(), ds, params, opts);
  save_labels(o.out_labels, run.labeling);
  ReportSink(o.out_report, out).write(describe("cluster", o.modes.front(), ds, params, opts, run));
  return 0;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(o);
  const Params params = single_params(o);
  const RtOptions opts = rt_options(o);
  const DbscanRun rt = run_mode("rt", ds, params, opts);
  const NeighborIndex index(ds.points, params.eps, opts.bvh);
  const Labeling classic = classic_dbscan(index, params);
  const EquivalenceReport eq = compare_clusterings(rt.labeling, classic, index, params);

  RunReport r = describe("verify", "rt", ds, params, opts, rt);
  r.equivalent = eq.pass();
  r.differences = eq.differences.size();
  save_labels(o.out_labels, rt.labeling);
  ReportSink(o.out_report, out).write(r);
  for (std::size_t i = 0; i < std::min<std::size_t>(eq.differences.size(), 20); ++i) {
    err << "difference at point " << eq.differences[i].point << ": " << eq.differences[i].message << '\n';
  }
  return eq.pass() ? 0 : 1;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const Dataset ds = load_dataset(o);
  const RtOptions opts = rt_options(o);
  ReportSink sink(o.out_report, out);
  for (const std::string& mode : o.modes) {
    for (double eps : o.eps) {
      for (std::size_t min_pts : o.min_pts) {
        const Params params{eps, min_pts};
        params.validate();
        sink.write(describe("sweep", mode, ds, params, opts, run_mode(mode, ds, params, opts)));
      }
    }
  }
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  if (o.repeats < 1) throw std::invalid_argument("--repeats must be at least 1");
  const Dataset ds = load_dataset(o);
  const RtOptions opts = rt_options(o);
  ReportSink sink(o.out_report, out);
  for (const std::string& mode : o.modes) {
    for (double eps : o.eps) {
      for (std::size_t min_pts : o.min_pts) {
        const Params params{eps, min_pts};
        params.validate();
        run_mode(mode, ds, params, opts);  // warm-up, not recorded

        std::vector<DbscanRun> runs;
        for (std::size_t i = 0; i < o.repeats; ++i) runs.push_back(run_mode(mode, ds, params, opts));
        RunReport r = describe("bench", mode, ds, params, opts, runs.back());
        StageTimings mean;
        for (const DbscanRun& run : runs) {
          r.samples_total_ms.push_back(run.timings.total_ms);
          mean.index_build_ms += run.timings.index_build_ms;
          mean.stage1_ms += run.timings.stage1_ms;
          mean.stage2_ms += run.timings.stage2_ms;
          mean.assembly_ms += run.timings.assembly_ms;
          mean.total_ms += run.timings.total_ms;
        }
        const double k = static_cast<double>(runs.size());
        mean.index_build_ms /= k;
        mean.stage1_ms /= k;
        mean.stage2_ms /= k;
        mean.assembly_ms /= k;
        mean.total_ms /= k;
        r.timings = mean;
        sink.write(r);
      }
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Density-based clustering over a sphere-expanded bounding volume hierarchy", "rtdbscan"};
  app.require_subcommand(1);
  Options o;

  const std::vector<std::string> mode_names{"rt", "classic", "brute"};
  auto add_common = [&](CLI::App* sub, bool multi_value) {
    sub->add_option("--input", o.input, "CSV file of coordinates");
    sub->add_option("--generate", o.generate, "synthetic dataset, e.g. uniform:n=1000,dims=2");
    sub->add_option("--seed", o.seed, "generator seed");
    sub->add_option("--dims", o.dims, "2 or 3")->check(CLI::IsMember({2, 3}));
    sub->add_option("--columns", o.columns, "column index per coordinate")->delimiter(',');
    sub->add_flag("--header", o.header, "skip the first CSV line");
    sub->add_option("--limit", o.limit, "use only the first N points");
    auto* eps = sub->add_option("--eps", o.eps, "neighborhood radius")->required();
    auto* min_pts = sub->add_option("--minpts", o.min_pts, "minimum neighbor count (self excluded)")->required();
    auto* mode = sub->add_option("--mode", o.modes, "rt, classic or brute")->check(CLI::IsMember(mode_names));
    if (multi_value) {
      eps->delimiter(',');
      min_pts->delimiter(',');
      mode->delimiter(',');
    }
    sub->add_flag("--early-exit", o.early_exit, "stop stage-1 counts at minpts");
    sub->add_flag("--deterministic", o.deterministic, "sequential reference path regardless of --threads");
    sub->add_option("--threads", o.threads, "worker threads for stage 1 and stage 2")->check(CLI::Range(1u, 1024u));
    sub->add_option("--leaf-capacity", o.leaf_capacity, "spheres per BVH leaf")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
    sub->add_option("--split", o.split, "BVH split rule: median or sah")->check(CLI::IsMember({"median", "sah"}));
    sub->add_option("--out-labels", o.out_labels, "write id,label CSV here");
    sub->add_option("--out-report", o.out_report, "write the run report here instead of stdout");
  };

  auto* cluster = app.add_subcommand("cluster", "cluster one dataset with one mode");
  add_common(cluster, false);
  auto* verify = app.add_subcommand("verify", "run rt and classic and compare; exit 0 iff equivalent");
  add_common(verify, false);
  auto* sweep = app.add_subcommand("sweep", "one report per (mode, eps, minpts) cell");
  add_common(sweep, true);
  auto* bench = app.add_subcommand("bench", "repeat each cell and report averaged timings");
  add_common(bench, true);
  bench->add_option("--repeats", o.repeats, "timed repetitions after one warm-up run");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*cluster) return cmd_cluster(o, out);
    if (*verify) return cmd_verify(o, out, err);
    if (*sweep) return cmd_sweep(o, out);
    return cmd_bench(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace rtdbscan::cli
