#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "foilskin/csv.hpp"
#include "foilskin/errors.hpp"
#include "foilskin/geometry.hpp"
#include "foilskin/sensing.hpp"
#include "json.hpp"

namespace foilskin {

inline constexpr std::size_t kTargetCount = 2 * kMarkerCount;
using TargetValues = std::array<double, kTargetCount>;

inline std::string capacitance_header() {
  std::string h = "t";
  for (auto name : kChannelNames) {
    h += ',';
    h += name;
  }
  return h;
}

inline std::string marker_header() {
  std::string h = "t";
  for (std::size_t i = 1; i <= kMarkerCount; ++i) {
    h += ",x" + std::to_string(i) + ",y" + std::to_string(i);
  }
  return h;
}

inline std::string format_capacitance_log(std::span<const CapacitanceFrame> frames) {
  std::string out = capacitance_header() + "\n";
  out.reserve(frames.size() * 110);
  for (const auto& f : frames) {
    csv::append_time(out, f.t);
    for (double v : f.values) {
      out += ',';
      csv::append_value(out, v);
    }
    out += '\n';
  }
  return out;
}

inline std::string format_marker_log(std::span<const MarkerSet> sets) {
  std::string out = marker_header() + "\n";
  for (const auto& m : sets) {
    csv::append_time(out, m.t);
    for (const auto& p : m.points) {
      out += ',';
      csv::append_value(out, p.x);
      out += ',';
      csv::append_value(out, p.y);
    }
    out += '\n';
  }
  return out;
}

inline void write_capacitance_log(const std::string& path, std::span<const CapacitanceFrame> frames) {
  csv::write_file(path, format_capacitance_log(frames));
}

inline void write_marker_log(const std::string& path, std::span<const MarkerSet> sets) {
  csv::write_file(path, format_marker_log(sets));
}

namespace detail {

// Reads the header and numeric rows of a log, enforcing column count and
// strictly increasing time. Calls `row(values, line_no)` per data row.
template <typename RowFn>
void read_log(std::istream& in, const std::string& name, const std::string& header,
              std::size_t columns, RowFn&& row) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(name, line_no, "empty file");
  if (csv::trim_eol(line) != header) {
    throw ParseError(name, line_no, "schema error: expected header '" + header + "'");
  }
  double prev_t = -INFINITY;
  std::vector<double> values(columns);
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = csv::trim_eol(line);
    if (text.empty()) continue;
    const auto cells = csv::split(text);
    if (cells.size() != columns) {
      throw ParseError(name, line_no,
                       "expected " + std::to_string(columns) + " columns, found " +
                           std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < columns; ++i) {
      const auto v = csv::parse_double(cells[i]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(name, line_no, "malformed number in column " + std::to_string(i + 1));
      }
      values[i] = *v;
    }
    if (!(values[0] > prev_t)) {
      throw ParseError(name, line_no, "timestamps must be strictly increasing");
    }
    prev_t = values[0];
    row(values, line_no);
  }
}

}  // namespace detail

inline std::vector<CapacitanceFrame> parse_capacitance_log(std::istream& in,
                                                           const std::string& name = "<stream>") {
  std::vector<CapacitanceFrame> frames;
  detail::read_log(in, name, capacitance_header(), 1 + kChannelCount,
                   [&](const std::vector<double>& v, std::size_t line_no) {
                     CapacitanceFrame f{v[0], {}, FrameKind::raw};
                     for (std::size_t i = 0; i < kChannelCount; ++i) {
                       if (!(v[i + 1] > 0.0)) {
                         throw ParseError(name, line_no,
                                          "raw capacitance must be positive in column " +
                                              std::string(kChannelNames[i]));
                       }
                       f.values[i] = v[i + 1];
                     }
                     frames.push_back(f);
                   });
  return frames;
}

inline std::vector<MarkerSet> parse_marker_log(std::istream& in,
                                               const std::string& name = "<stream>") {
  std::vector<MarkerSet> sets;
  detail::read_log(in, name, marker_header(), 1 + kTargetCount,
                   [&](const std::vector<double>& v, std::size_t) {
                     MarkerSet m;
                     m.t = v[0];
                     for (std::size_t i = 0; i < kMarkerCount; ++i) {
                       m.points[i] = {v[1 + 2 * i], v[2 + 2 * i]};
                     }
                     sets.push_back(m);
                   });
  return sets;
}

inline std::vector<CapacitanceFrame> load_capacitance_log(const std::string& path) {
  auto in = csv::open_input(path);
  return parse_capacitance_log(in, path);
}

inline std::vector<MarkerSet> load_marker_log(const std::string& path) {
  auto in = csv::open_input(path);
  return parse_marker_log(in, path);
}

struct TrainingPair {
  double t = 0.0;
  ChannelValues input{};  // normalized capacitance
  TargetValues target{};  // marker coordinates / chord length
};

inline TargetValues markers_to_target(const MarkerSet& m, double chord_length) {
  TargetValues out{};
  for (std::size_t i = 0; i < kMarkerCount; ++i) {
    out[2 * i] = m.points[i].x / chord_length;
    out[2 * i + 1] = m.points[i].y / chord_length;
  }
  return out;
}

struct AlignmentResult {
  std::vector<TrainingPair> pairs;
  std::size_t dropped = 0;
  double max_gap = 0.0;
};

/// Pairs each marker set with the capacitance frame nearest in time. Sets
/// whose nearest frame is further than `tolerance` are dropped and counted.
inline AlignmentResult align_streams(std::span<const CapacitanceFrame> frames,
                                     std::span<const MarkerSet> markers,
                                     const BaselineReference& ref, double tolerance,
                                     double chord_length) {
  if (frames.empty() || markers.empty()) throw AlignmentError("both streams must be non-empty");
  if (!(tolerance > 0.0)) throw AlignmentError("tolerance must be positive");
  if (!(chord_length > 0.0)) throw AlignmentError("chord length must be positive");
  ref.validate();

  AlignmentResult result;
  std::size_t j = 0;
  for (const auto& m : markers) {
    while (j + 1 < frames.size() && std::abs(frames[j + 1].t - m.t) <= std::abs(frames[j].t - m.t)) {
      ++j;
    }
    const double gap = std::abs(frames[j].t - m.t);
    if (gap > tolerance) {
      ++result.dropped;
      continue;
    }
    result.max_gap = std::max(result.max_gap, gap);
    TrainingPair pair;
    pair.t = m.t;
    pair.input = normalize_frame(frames[j], ref).values;
    pair.target = markers_to_target(m, chord_length);
    result.pairs.push_back(pair);
  }
  if (result.pairs.empty()) {
    throw AlignmentError("no marker set has a capacitance frame within tolerance");
  }
  return result;
}

struct SplitRatios {
  double train = 0.7;
  double validation = 0.2;
  double test = 0.1;
};

struct SplitCounts {
  std::size_t train = 0, validation = 0, test = 0;
};

/// Train and validation sizes are rounded to nearest; test takes the rest.
inline SplitCounts split_counts(std::size_t n, const SplitRatios& ratios) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (!(ratios.train > 0.0 && ratios.validation >= 0.0 && ratios.test >= 0.0 && total > 0.0)) {
    throw DatasetError("split ratios must be non-negative with a positive training share");
  }
  SplitCounts c;
  c.train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train / total));
  c.validation =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.validation / total));
  c.train = std::min(c.train, n);
  c.validation = std::min(c.validation, n - c.train);
  c.test = n - c.train - c.validation;
  return c;
}

struct Dataset {
  std::vector<TrainingPair> pairs;
  std::vector<std::size_t> train, validation, test;
  std::uint64_t seed = 0;
  double target_scale = 200.0;  // mm per target unit
};

inline Dataset split_dataset(std::vector<TrainingPair> pairs, std::uint64_t seed,
                             double target_scale, const SplitRatios& ratios = {}) {
  if (pairs.size() < 10) throw DatasetError("need at least 10 pairs to split");
  const SplitCounts counts = split_counts(pairs.size(), ratios);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Dataset ds;
  ds.pairs = std::move(pairs);
  ds.seed = seed;
  ds.target_scale = target_scale;
  const auto b = order.begin();
  ds.train.assign(b, b + static_cast<std::ptrdiff_t>(counts.train));
  ds.validation.assign(b + static_cast<std::ptrdiff_t>(counts.train),
                       b + static_cast<std::ptrdiff_t>(counts.train + counts.validation));
  ds.test.assign(b + static_cast<std::ptrdiff_t>(counts.train + counts.validation), order.end());
  return ds;
}

struct DatasetManifestInfo {
  std::string capacitance_log;
  std::string marker_log;
  double tolerance = 0.0;
  std::size_t dropped = 0;
  double max_gap = 0.0;
};

inline nlohmann::ordered_json dataset_manifest(const Dataset& ds, const DatasetManifestInfo& info) {
  nlohmann::ordered_json j;
  j["capacitance_log"] = info.capacitance_log;
  j["marker_log"] = info.marker_log;
  j["pairs"] = ds.pairs.size();
  j["train"] = ds.train.size();
  j["validation"] = ds.validation.size();
  j["test"] = ds.test.size();
  j["seed"] = ds.seed;
  j["target_scale_mm"] = ds.target_scale;
  j["tolerance_s"] = info.tolerance;
  j["dropped_pairs"] = info.dropped;
  j["max_gap_s"] = info.max_gap;
  return j;
}

}  // namespace foilskin
