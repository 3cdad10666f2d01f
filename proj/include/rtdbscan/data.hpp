#pragma once

#include "rtdbscan/geometry.hpp"

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rtdbscan {

struct Dataset {
  std::vector<Point> points;
  int dims = 2;
  std::string source;

  std::size_t size() const { return points.size(); }
};

/// Malformed input row. `row()` is the 1-based line number in the file.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const { return row_; }

private:
  std::size_t row_;
};

struct CsvOptions {
  int dims = 2;
  /// Column index per coordinate; empty selects the first `dims` columns.
  std::vector<std::size_t> columns;
  bool has_header = false;
  std::optional<std::size_t> limit;
};

namespace detail {

inline void check_dims(int dims) {
  if (dims != 2 && dims != 3) throw std::invalid_argument("dims must be 2 or 3, got " + std::to_string(dims));
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses comma-separated rows into points with ids in row order. 2D rows get z = 0.
/// Blank lines are skipped; any other row that fails to parse is an error.
inline Dataset parse_csv(std::istream& in, const CsvOptions& opts, std::string source = "<stream>") {
  detail::check_dims(opts.dims);
  std::vector<std::size_t> columns = opts.columns;
  if (columns.empty()) {
    for (int k = 0; k < opts.dims; ++k) columns.push_back(static_cast<std::size_t>(k));
  }
  if (columns.size() != static_cast<std::size_t>(opts.dims)) {
    throw std::invalid_argument("expected " + std::to_string(opts.dims) + " column indices, got " +
                                std::to_string(columns.size()));
  }

  Dataset ds;
  ds.dims = opts.dims;
  ds.source = std::move(source);
  std::string line;
  std::size_t row = 0;
  bool header_pending = opts.has_header;
  while (std::getline(in, line)) {
    ++row;
    if (opts.limit && ds.points.size() >= *opts.limit) break;
    if (detail::trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = detail::split_fields(line);
    Point p;
    p.id = static_cast<PointId>(ds.points.size());
    double coords[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < opts.dims; ++k) {
      const std::size_t c = columns[static_cast<std::size_t>(k)];
      if (c >= fields.size()) {
        throw ParseError(row, "missing column " + std::to_string(c) + " (row has " + std::to_string(fields.size()) +
                                  " fields)");
      }
      const auto value = detail::parse_double(fields[c]);
      if (!value) throw ParseError(row, "non-numeric field '" + std::string(fields[c]) + "' in column " + std::to_string(c));
      coords[k] = *value;
    }
    p.x = coords[0];
    p.y = coords[1];
    p.z = coords[2];
    ds.points.push_back(p);
  }
  if (ds.points.empty()) throw std::runtime_error(ds.source + ": no data rows");
  return ds;
}

inline Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_csv(in, opts, path);
}

/// Writes one row per point with round-trippable decimals.
inline void write_csv(std::ostream& out, const Dataset& ds) {
  for (const Point& p : ds.points) {
    out << detail::format_double(p.x) << ',' << detail::format_double(p.y);
    if (ds.dims == 3) out << ',' << detail::format_double(p.z);
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(out, ds);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Gaussian clouds around fixed centers. Dimensionality follows the centers.
struct BlobSpec {
  std::vector<std::vector<double>> centers;
  std::size_t per_center = 50;
  double stddev = 0.01;
};

/// Uniform points in the axis-aligned cube [lo, hi]^dims.
struct UniformSpec {
  std::size_t n = 1000;
  double lo = 0.0;
  double hi = 1.0;
  int dims = 2;
};

/// All points inside a ball of radius `scale` at the origin; scale 0 gives exact duplicates.
struct DenseSpec {
  std::size_t n = 1000;
  double scale = 0.0;
  int dims = 2;
};

/// Points (i * spacing, 0) for i in [0, n).
struct CollinearSpec {
  std::size_t n = 6;
  double spacing = 1.0;
};

using GeneratorSpec = std::variant<BlobSpec, UniformSpec, DenseSpec, CollinearSpec>;

namespace detail {

// Standard distributions are implementation-defined, so variates are derived
// directly from the mt19937_64 stream to stay identical across toolchains.
class Variates {
public:
  explicit Variates(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

inline void push_point(Dataset& ds, double x, double y, double z) {
  ds.points.push_back(Point{static_cast<PointId>(ds.points.size()), x, y, ds.dims == 2 ? 0.0 : z});
}

}  // namespace detail

inline Dataset generate(const GeneratorSpec& spec, std::uint64_t seed) {
  detail::Variates rng(seed);
  Dataset ds;
  ds.source = "generated:seed=" + std::to_string(seed);

  if (const auto* blob = std::get_if<BlobSpec>(&spec)) {
    if (blob->centers.empty()) throw std::invalid_argument("blob generator needs at least one center");
    const std::size_t dims = blob->centers.front().size();
    detail::check_dims(static_cast<int>(dims));
    for (const auto& c : blob->centers) {
      if (c.size() != dims) throw std::invalid_argument("blob centers must share one dimensionality");
    }
    if (!(blob->stddev >= 0.0)) throw std::invalid_argument("blob stddev must be non-negative");
    ds.dims = static_cast<int>(dims);
    ds.points.reserve(blob->centers.size() * blob->per_center);
    for (const auto& c : blob->centers) {
      for (std::size_t i = 0; i < blob->per_center; ++i) {
        const double x = c[0] + blob->stddev * rng.normal();
        const double y = c[1] + blob->stddev * rng.normal();
        const double z = dims == 3 ? c[2] + blob->stddev * rng.normal() : 0.0;
        detail::push_point(ds, x, y, z);
      }
    }
  } else if (const auto* uni = std::get_if<UniformSpec>(&spec)) {
    detail::check_dims(uni->dims);
    if (!(uni->hi > uni->lo)) throw std::invalid_argument("uniform generator needs hi > lo");
    ds.dims = uni->dims;
    ds.points.reserve(uni->n);
    const double w = uni->hi - uni->lo;
    for (std::size_t i = 0; i < uni->n; ++i) {
      const double x = uni->lo + w * rng.uniform();
      const double y = uni->lo + w * rng.uniform();
      const double z = uni->dims == 3 ? uni->lo + w * rng.uniform() : 0.0;
      detail::push_point(ds, x, y, z);
    }
  } else if (const auto* dense = std::get_if<DenseSpec>(&spec)) {
    detail::check_dims(dense->dims);
    if (!(dense->scale >= 0.0)) throw std::invalid_argument("dense scale must be non-negative");
    ds.dims = dense->dims;
    ds.points.reserve(dense->n);
    for (std::size_t i = 0; i < dense->n; ++i) {
      if (dense->scale == 0.0) {
        detail::push_point(ds, 0.0, 0.0, 0.0);
        continue;
      }
      // Rejection sampling inside the unit ball, then scaled.
      double x, y, z;
      do {
        x = 2.0 * rng.uniform() - 1.0;
        y = 2.0 * rng.uniform() - 1.0;
        z = dense->dims == 3 ? 2.0 * rng.uniform() - 1.0 : 0.0;
      } while (x * x + y * y + z * z > 1.0);
      detail::push_point(ds, dense->scale * x, dense->scale * y, dense->scale * z);
    }
  } else {
    const auto& line = std::get<CollinearSpec>(spec);
    ds.dims = 2;
    ds.points.reserve(line.n);
    for (std::size_t i = 0; i < line.n; ++i) {
      detail::push_point(ds, static_cast<double>(i) * line.spacing, 0.0, 0.0);
    }
  }
  return ds;
}

/// Parses generator descriptors such as
///   uniform:n=1000,lo=0,hi=1,dims=2
///   blob:centers=0/0;10/10,count=50,stddev=0.01
///   dense:n=1000,scale=0,dims=2
///   collinear:n=6,spacing=1
inline GeneratorSpec parse_generator_spec(std::string_view text) {
  const std::size_t colon = text.find(':');
  const std::string kind(text.substr(0, colon));
  const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);

  std::vector<std::pair<std::string, std::string>> kv;
  for (std::string_view field : detail::split_fields(rest)) {
    if (field.empty()) continue;
    const std::size_t eq = field.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("generator option '" + std::string(field) + "' lacks '='");
    kv.emplace_back(std::string(field.substr(0, eq)), std::string(field.substr(eq + 1)));
  }

  auto number = [](const std::string& key, const std::string& v) {
    const auto d = detail::parse_double(v);
    if (!d) throw std::invalid_argument("generator option " + key + ": '" + v + "' is not a number");
    return *d;
  };
  auto count = [&](const std::string& key, const std::string& v) {
    const double d = number(key, v);
    if (d < 0 || d != std::floor(d)) throw std::invalid_argument("generator option " + key + " must be a count");
    return static_cast<std::size_t>(d);
  };
  auto unknown = [&](const std::string& key) {
    return std::invalid_argument("unknown option '" + key + "' for generator '" + kind + "'");
  };

  if (kind == "uniform") {
    UniformSpec s;
    for (const auto& [k, v] : kv) {
      if (k == "n") s.n = count(k, v);
      else if (k == "lo") s.lo = number(k, v);
      else if (k == "hi") s.hi = number(k, v);
      else if (k == "dims") s.dims = static_cast<int>(count(k, v));
      else throw unknown(k);
    }
    return s;
  }
  if (kind == "dense") {
    DenseSpec s;
    for (const auto& [k, v] : kv) {
      if (k == "n") s.n = count(k, v);
      else if (k == "scale") s.scale = number(k, v);
      else if (k == "dims") s.dims = static_cast<int>(count(k, v));
      else throw unknown(k);
    }
    return s;
  }
  if (kind == "collinear") {
    CollinearSpec s;
    for (const auto& [k, v] : kv) {
      if (k == "n") s.n = count(k, v);
      else if (k == "spacing") s.spacing = number(k, v);
      else throw unknown(k);
    }
    return s;
  }
  if (kind == "blob") {
    BlobSpec s;
    for (const auto& [k, v] : kv) {
      if (k == "count") {
        s.per_center = count(k, v);
      } else if (k == "stddev") {
        s.stddev = number(k, v);
      } else if (k == "centers") {
        std::string_view centers = v;
        while (!centers.empty()) {
          const std::size_t semi = centers.find(';');
          std::string_view one = centers.substr(0, semi);
          std::vector<double> c;
          while (!one.empty()) {
            const std::size_t slash = one.find('/');
            c.push_back(number(k, std::string(one.substr(0, slash))));
            one = slash == std::string_view::npos ? std::string_view{} : one.substr(slash + 1);
          }
          s.centers.push_back(std::move(c));
          centers = semi == std::string_view::npos ? std::string_view{} : centers.substr(semi + 1);
        }
      } else {
        throw unknown(k);
      }
    }
    return s;
  }
  throw std::invalid_argument("unknown generator '" + kind + "' (expected uniform, blob, dense or collinear)");
}

}  // namespace rtdbscan
