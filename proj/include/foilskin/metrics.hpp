#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foilskin/errors.hpp"
#include "foilskin/geometry.hpp"

namespace foilskin {

enum class ProfileKind { step, sine, triangle };

inline std::string to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::step: return "step";
    case ProfileKind::sine: return "sine";
    case ProfileKind::triangle: return "triangle";
  }
  return "unknown";
}

struct SetpointProfile {
  ProfileKind kind = ProfileKind::step;
  double mean = 4.25;          // percent
  double peak_to_peak = 5.0;   // percent
  double period = 10.0;        // s
  double step_start = 2.5;     // percent
  double step_increment = 2.0; // percent
  double step_dwell = 5.0;     // s
  double step_end = 8.5;       // percent
};

/// Uniformly sampled closed-loop run.
struct ExperimentRecord {
  double dt = 0.0;
  SetpointProfile profile{};
  std::vector<double> t, setpoint, estimate, truth, command;
  std::size_t estimate_faults = 0;  // ticks where the estimated markers were unusable

  std::size_t size() const { return t.size(); }

  void validate() const {
    if (!(dt > 0.0)) throw MetricError("record dt must be positive");
    const std::size_t n = t.size();
    if (setpoint.size() != n || estimate.size() != n || truth.size() != n || command.size() != n) {
      throw MetricError("record series lengths differ");
    }
  }
};

/// RMSE(reference, actual) divided by the mean of the reference.
inline double nrmse(std::span<const double> reference, std::span<const double> actual) {
  if (reference.size() != actual.size() || reference.empty()) {
    throw MetricError("nrmse: series must be non-empty and of equal length");
  }
  double sq = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = actual[i] - reference[i];
    sq += d * d;
    sum += reference[i];
  }
  const double n = static_cast<double>(reference.size());
  const double mean = sum / n;
  if (mean == 0.0) throw MetricError("nrmse: reference mean is zero");
  return std::sqrt(sq / n) / mean;
}

struct PhaseAverage {
  std::vector<double> phase;   // bin centre as a fraction of the period
  std::vector<double> mean;
  std::vector<double> std;     // sample spread within the bin
  std::vector<double> sem;     // std / sqrt(count): spread of the bin mean
  std::vector<std::size_t> count;
  std::size_t cycles = 0;
};

/// Folds a uniformly sampled series (first sample at t = 0) onto one period
/// and averages per bin over whole cycles. Defaults to one bin per sample
/// period.
inline PhaseAverage phase_average(std::span<const double> series, double period, double dt,
                                  std::size_t bins = 0) {
  if (!(period > 0.0) || !(dt > 0.0)) throw MetricError("phase_average: period and dt must be positive");
  const double per_cycle = period / dt;
  if (per_cycle < 8.0) throw MetricError("phase_average: fewer than 8 samples per period");
  const double duration = static_cast<double>(series.size()) * dt;
  if (duration + 0.5 * dt < 2.0 * period) throw MetricError("phase_average: series shorter than two periods");
  if (bins == 0) bins = static_cast<std::size_t>(std::llround(per_cycle));
  PhaseAverage out;
  out.cycles = static_cast<std::size_t>(std::floor((duration + 0.5 * dt) / period));
  const auto usable = std::min(series.size(),
                               static_cast<std::size_t>(std::llround(static_cast<double>(out.cycles) * per_cycle)));
  // period / dt is rarely an exact integer in floating point (2.0 / 0.01 is
  // 199.99999999999997), so nudge before flooring or whole cycles drift a bin.
  auto bin_of = [&](std::size_t i) {
    const double pos = static_cast<double>(i) * static_cast<double>(bins) / per_cycle;
    return static_cast<std::size_t>(std::floor(pos + 1e-7)) % bins;
  };
  std::vector<double> sum(bins, 0.0), sq(bins, 0.0);
  out.count.assign(bins, 0);
  for (std::size_t i = 0; i < usable; ++i) {
    const std::size_t b = bin_of(i);
    sum[b] += series[i];
    ++out.count[b];
  }
  out.mean.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.mean[b] = out.count[b] ? sum[b] / static_cast<double>(out.count[b]) : std::nan("");
  }
  for (std::size_t i = 0; i < usable; ++i) {
    const std::size_t b = bin_of(i);
    const double d = series[i] - out.mean[b];
    sq[b] += d * d;
  }
  out.phase.resize(bins);
  out.std.resize(bins);
  out.sem.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.phase[b] = (static_cast<double>(b) + 0.5) / static_cast<double>(bins);
    const auto c = static_cast<double>(out.count[b]);
    out.std[b] = out.count[b] > 1 ? std::sqrt(sq[b] / (c - 1.0)) : 0.0;
    out.sem[b] = out.count[b] > 0 ? out.std[b] / std::sqrt(c) : 0.0;
  }
  return out;
}

struct CamberBucket {
  double lo = 0.0;  // inclusive, percent camber
  double hi = 0.0;  // exclusive
};

struct ErrorStats {
  double mean = 0.0, std = 0.0, max = 0.0, min = 0.0;  // percent of foil length
  double marker_mean = 0.0;  // mean over all five markers, percent of foil length
  std::size_t count = 0;
};

struct BucketStats {
  CamberBucket bucket;
  std::optional<ErrorStats> stats;  // empty bucket stays absent
};

namespace detail {

inline ErrorStats summarize(std::span<const double> tip, std::span<const double> marker) {
  ErrorStats s;
  s.count = tip.size();
  double sum = 0.0, msum = 0.0;
  s.max = -std::numeric_limits<double>::infinity();
  s.min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tip.size(); ++i) {
    sum += tip[i];
    msum += marker[i];
    s.max = std::max(s.max, tip[i]);
    s.min = std::min(s.min, tip[i]);
  }
  const double n = static_cast<double>(tip.size());
  s.mean = sum / n;
  s.marker_mean = msum / n;
  double sq = 0.0;
  for (double e : tip) sq += (e - s.mean) * (e - s.mean);
  s.std = std::sqrt(sq / n);
  return s;
}

}  // namespace detail

struct SensorErrorReport {
  ErrorStats overall;
  std::vector<BucketStats> buckets;
};

/// Tip-position error |estimated - true trailing edge| as a percentage of
/// the foil length, bucketed by true camber.
inline SensorErrorReport sensor_error_stats(std::span<const MarkerSet> estimates,
                                            std::span<const MarkerSet> truth,
                                            std::span<const double> true_camber, double foil_length,
                                            std::span<const CamberBucket> buckets) {
  if (estimates.size() != truth.size() || truth.size() != true_camber.size() || truth.empty()) {
    throw MetricError("sensor_error_stats: series must be aligned and non-empty");
  }
  if (!(foil_length > 0.0)) throw MetricError("sensor_error_stats: foil length must be positive");
  std::vector<double> tip(truth.size()), marker(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tip[i] = 100.0 * norm(estimates[i].trailing_edge() - truth[i].trailing_edge()) / foil_length;
    double m = 0.0;
    for (std::size_t k = 0; k < kMarkerCount; ++k) {
      m += norm(estimates[i].points[k] - truth[i].points[k]);
    }
    marker[i] = 100.0 * m / (static_cast<double>(kMarkerCount) * foil_length);
  }
  SensorErrorReport report;
  report.overall = detail::summarize(tip, marker);
  for (const auto& b : buckets) {
    std::vector<double> bt, bm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (true_camber[i] >= b.lo && true_camber[i] < b.hi) {
        bt.push_back(tip[i]);
        bm.push_back(marker[i]);
      }
    }
    BucketStats entry{b, std::nullopt};
    if (!bt.empty()) entry.stats = detail::summarize(bt, bm);
    report.buckets.push_back(entry);
  }
  return report;
}

struct StepEvent {
  double time = 0.0;  // s, when the set point jumps
  double from = 0.0;  // percent
  double to = 0.0;    // percent
};

namespace detail {

// First time after `begin` at which the series reaches `level` in the
// direction of travel, linearly interpolated between samples.
inline std::optional<double> crossing(std::span<const double> y, double dt, std::size_t begin,
                                      std::size_t end, double level, bool rising) {
  for (std::size_t i = begin; i < end; ++i) {
    const bool hit = rising ? y[i] >= level : y[i] <= level;
    if (!hit) continue;
    if (i == begin) return static_cast<double>(i) * dt;
    const double y0 = y[i - 1], y1 = y[i];
    const double frac = y1 == y0 ? 1.0 : (level - y0) / (y1 - y0);
    return (static_cast<double>(i - 1) + frac) * dt;
  }
  return std::nullopt;
}

}  // namespace detail

/// 10-90% rise times of a uniformly sampled series (t0 = 0), one per step;
/// each step is searched until the next one begins.
inline std::vector<double> rise_times(std::span<const double> series, double dt,
                                      std::span<const StepEvent> steps) {
  if (!(dt > 0.0)) throw MetricError("rise_time: dt must be positive");
  if (steps.empty()) throw MetricError("rise_time: no step found");
  std::vector<double> out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    const double delta = s.to - s.from;
    if (delta == 0.0) throw MetricError("rise_time: step has zero amplitude");
    const auto begin = static_cast<std::size_t>(std::max(0.0, std::ceil(s.time / dt - 1e-9)));
    const std::size_t end =
        k + 1 < steps.size()
            ? std::min(series.size(), static_cast<std::size_t>(std::ceil(steps[k + 1].time / dt - 1e-9)))
            : series.size();
    if (begin >= end) throw MetricError("rise_time: no step found in the series");
    const bool rising = delta > 0.0;
    const auto t10 = detail::crossing(series, dt, begin, end, s.from + 0.1 * delta, rising);
    const auto t90 = detail::crossing(series, dt, begin, end, s.from + 0.9 * delta, rising);
    if (!t10 || !t90) throw MetricError("rise_time: step at t=" + std::to_string(s.time) + " never completes");
    out.push_back(*t90 - *t10);
  }
  return out;
}

inline double rise_time(std::span<const double> series, double dt, std::span<const StepEvent> steps) {
  const auto r = rise_times(series, dt, steps);
  double sum = 0.0;
  for (double v : r) sum += v;
  return sum / static_cast<double>(r.size());
}

/// |mean(actual - reference)| over the last `window` seconds before each
/// boundary time.
inline std::vector<double> plateau_errors(std::span<const double> reference,
                                          std::span<const double> actual, double dt,
                                          std::span<const double> plateau_ends, double window) {
  std::vector<double> out;
  for (double end_t : plateau_ends) {
    const auto end = std::min(reference.size(), static_cast<std::size_t>(std::llround(end_t / dt)));
    const auto len = static_cast<std::size_t>(std::llround(window / dt));
    if (len == 0 || end < len) throw MetricError("plateau window outside the series");
    double sum = 0.0;
    for (std::size_t i = end - len; i < end; ++i) sum += actual[i] - reference[i];
    out.push_back(std::abs(sum / static_cast<double>(len)));
  }
  return out;
}

}  // namespace foilskin
