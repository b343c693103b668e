#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "foilskin/control.hpp"
#include "foilskin/metrics.hpp"
#include "../support/gen.hpp"

namespace foilskin {
namespace {

using testing::Gen;

TEST(Nrmse, Examples) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  EXPECT_EQ(nrmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(nrmse(std::vector<double>(50, 4.0), std::vector<double>(50, 5.0)), 0.25);
  // RMSE 1 over a mean of 3.
  EXPECT_DOUBLE_EQ(nrmse(std::vector<double>{2.0, 4.0}, std::vector<double>{3.0, 3.0}), 1.0 / 3.0);
}

TEST(Nrmse, Errors) {
  EXPECT_THROW(nrmse(std::vector<double>{1.0, -1.0}, std::vector<double>{0.0, 0.0}), MetricError);
  EXPECT_THROW(nrmse(std::vector<double>{}, std::vector<double>{}), MetricError);
  EXPECT_THROW(nrmse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), MetricError);
  try {
    nrmse(std::vector<double>{0.0}, std::vector<double>{1.0});
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::numerical);
  }
}

TEST(NrmseProperty, NonNegativeAndLinearInError) {
  Gen gen(201);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + gen.index(200);
    std::vector<double> ref(n), err(n), act(n), scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
      ref[i] = gen.uniform(2.0, 9.0);
      err[i] = gen.normal(0.0, 0.5);
      act[i] = ref[i] + err[i];
    }
    const double k = gen.uniform(0.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = ref[i] + k * err[i];
    const double base = nrmse(ref, act);
    EXPECT_GE(base, 0.0);
    EXPECT_NEAR(nrmse(ref, scaled), k * base, 1e-12 * std::max(1.0, k * base));
    EXPECT_EQ(nrmse(ref, ref), 0.0);
    act[gen.index(n)] += 1e-3;
    EXPECT_GT(nrmse(ref, act), 0.0);
  }
}

TEST(PhaseAverage, ExactlyPeriodicSignal) {
  const double period = 2.0, dt = 0.01;
  std::vector<double> s(2000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 3.0 + std::sin(2.0 * std::numbers::pi * static_cast<double>(i % 200) / 200.0);
  const PhaseAverage pa = phase_average(s, period, dt);
  EXPECT_EQ(pa.cycles, 10u);
  ASSERT_EQ(pa.mean.size(), 200u);
  for (std::size_t b = 0; b < 200; ++b) {
    EXPECT_NEAR(pa.mean[b], s[b], 1e-12);
    EXPECT_NEAR(pa.mean[b], s[b + 600], 1e-12);
    EXPECT_LT(pa.std[b], 1e-12);
    EXPECT_EQ(pa.count[b], 10u);
    EXPECT_DOUBLE_EQ(pa.phase[b], (b + 0.5) / 200.0);
  }
}

TEST(PhaseAverage, NoiseOverTwentyCycles) {
  // Bin means of 20 cycles of N(0, sigma) scatter by sigma / sqrt(20).
  Gen gen(202);
  const double sigma = 0.3;
  std::vector<double> s(20 * 500);
  for (auto& v : s) v = gen.normal(0.0, sigma);
  const PhaseAverage pa = phase_average(s, 5.0, 0.01);
  ASSERT_EQ(pa.cycles, 20u);
  double sem = 0.0, spread = 0.0, sq = 0.0;
  for (std::size_t b = 0; b < pa.mean.size(); ++b) {
    sem += pa.sem[b] / 500.0;
    spread += pa.std[b] / 500.0;
    sq += pa.mean[b] * pa.mean[b] / 500.0;
  }
  const double expected = sigma / std::sqrt(20.0);
  EXPECT_NEAR(sem, expected, 0.05 * expected);
  EXPECT_NEAR(std::sqrt(sq), expected, 0.1 * expected);
  EXPECT_NEAR(spread, sigma, 0.05 * sigma);
}

TEST(PhaseAverage, Errors) {
  std::vector<double> s(199, 1.0);
  EXPECT_THROW(phase_average(s, 1.0, 0.01), MetricError);
  s.push_back(1.0);
  EXPECT_NO_THROW(phase_average(s, 1.0, 0.01));
  EXPECT_THROW(phase_average(s, 0.05, 0.01), MetricError);  // five samples per period
  EXPECT_THROW(phase_average(s, 0.0, 0.01), MetricError);
  EXPECT_THROW(phase_average(s, 1.0, 0.0), MetricError);
}

TEST(PhaseAverage, PartialCycleIsDropped) {
  std::vector<double> s(250);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i < 200 ? 1.0 : 100.0;
  const PhaseAverage pa = phase_average(s, 1.0, 0.01);
  EXPECT_EQ(pa.cycles, 2u);
  for (double m : pa.mean) EXPECT_EQ(m, 1.0);
}

TEST(PhaseAverage, CoarseBins) {
  std::vector<double> s(400);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i % 100);
  const PhaseAverage pa = phase_average(s, 1.0, 0.01, 4);
  ASSERT_EQ(pa.mean.size(), 4u);
  for (std::size_t b = 0; b < 4; ++b) {
    EXPECT_EQ(pa.count[b], 100u);
    EXPECT_NEAR(pa.mean[b], 25.0 * b + 12.0, 1e-12);
  }
}

TEST(PhaseAverageProperty, AveragedCycleIsFixedPoint) {
  Gen gen(203);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t per = 8 + gen.index(200);
    const std::size_t cycles = 2 + gen.index(10);
    std::vector<double> s(per * cycles + gen.index(per));
    for (auto& v : s) v = gen.uniform(-5.0, 5.0);
    const double dt = 0.01, period = dt * static_cast<double>(per);
    const PhaseAverage once = phase_average(s, period, dt);
    std::vector<double> repeated;
    for (std::size_t c = 0; c < 3; ++c) repeated.insert(repeated.end(), once.mean.begin(), once.mean.end());
    const PhaseAverage twice = phase_average(repeated, period, dt);
    ASSERT_EQ(twice.mean.size(), once.mean.size());
    for (std::size_t b = 0; b < once.mean.size(); ++b) {
      EXPECT_NEAR(twice.mean[b], once.mean[b], 1e-12);
      EXPECT_LT(twice.std[b], 1e-12);
    }
  }
}

MarkerSet markers_from(std::array<double, kMarkerCount> ys) {
  MarkerSet m;
  const std::array<double, kMarkerCount> xs{80.0, 110.0, 140.0, 170.0, 200.0};
  for (std::size_t k = 0; k < kMarkerCount; ++k) m.points[k] = {xs[k], ys[k]};
  return m;
}

const std::vector<CamberBucket> kBuckets{{2.0, 4.0}, {4.0, 6.0}, {6.0, 8.0}, {8.0, 10.0}};

TEST(SensorError, PerfectEstimateGivesZeros) {
  std::vector<MarkerSet> truth{markers_from({1, 2, 3, 4, 5}), markers_from({2, 4, 6, 8, 10})};
  const std::vector<double> camber{3.0, 5.0};
  const auto r = sensor_error_stats(truth, truth, camber, 200.0, kBuckets);
  EXPECT_EQ(r.overall.mean, 0.0);
  EXPECT_EQ(r.overall.std, 0.0);
  EXPECT_EQ(r.overall.max, 0.0);
  EXPECT_EQ(r.overall.min, 0.0);
  EXPECT_EQ(r.overall.count, 2u);
  ASSERT_TRUE(r.buckets[0].stats && r.buckets[1].stats);
  EXPECT_EQ(r.buckets[0].stats->count, 1u);
}

TEST(SensorError, OneMillimetreOnTwoHundredIsHalfPercent) {
  std::vector<MarkerSet> truth, est;
  std::vector<double> camber;
  for (int i = 0; i < 10; ++i) {
    const double y = 2.0 * i;
    truth.push_back(markers_from({y, y, y, y, y}));
    est.push_back(markers_from({y + 1, y + 1, y + 1, y + 1, y + 1}));
    camber.push_back(2.0 + 0.3 * i);
  }
  const auto r = sensor_error_stats(est, truth, camber, 200.0, kBuckets);
  EXPECT_DOUBLE_EQ(r.overall.mean, 0.5);
  EXPECT_DOUBLE_EQ(r.overall.marker_mean, 0.5);
  EXPECT_DOUBLE_EQ(r.overall.max, 0.5);
  EXPECT_DOUBLE_EQ(r.overall.min, 0.5);
  EXPECT_NEAR(r.overall.std, 0.0, 1e-15);
  // Cambers span 2.0 to 4.7: the top two buckets are absent, not zero.
  ASSERT_EQ(r.buckets.size(), 4u);
  EXPECT_EQ(r.buckets[0].stats->count, 7u);
  EXPECT_EQ(r.buckets[1].stats->count, 3u);
  EXPECT_FALSE(r.buckets[2].stats.has_value());
  EXPECT_FALSE(r.buckets[3].stats.has_value());
}

TEST(SensorError, TipAndMarkerMeansDiffer) {
  // Only the trailing edge is off, by 4 mm.
  const std::vector<MarkerSet> truth{markers_from({0, 0, 0, 0, 0})};
  const std::vector<MarkerSet> est{markers_from({0, 0, 0, 0, 4})};
  const auto r = sensor_error_stats(est, truth, std::vector<double>{3.0}, 200.0, kBuckets);
  EXPECT_DOUBLE_EQ(r.overall.mean, 2.0);
  EXPECT_DOUBLE_EQ(r.overall.marker_mean, 0.4);
}

TEST(SensorErrorProperty, OrderedStatistics) {
  Gen gen(204);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + gen.index(100);
    std::vector<MarkerSet> truth(n), est(n);
    std::vector<double> camber(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kMarkerCount; ++k) {
        truth[i].points[k] = {gen.uniform(50, 200), gen.uniform(-10, 50)};
        est[i].points[k] = truth[i].points[k] + PlanarPoint{gen.normal(0, 2), gen.normal(0, 2)};
      }
      camber[i] = gen.uniform(0.0, 10.0);
    }
    const auto r = sensor_error_stats(est, truth, camber, 200.0, kBuckets);
    std::size_t total = 0;
    for (const auto& b : r.buckets) {
      if (!b.stats) continue;
      total += b.stats->count;
      EXPECT_LE(b.stats->min, b.stats->mean + 1e-12);
      EXPECT_LE(b.stats->mean, b.stats->max + 1e-12);
      EXPECT_GE(b.stats->std, 0.0);
    }
    std::size_t in_range = 0;
    for (double c : camber) in_range += c >= 2.0 ? 1 : 0;
    EXPECT_EQ(total, in_range);
    EXPECT_LE(r.overall.min, r.overall.mean + 1e-12);
    EXPECT_LE(r.overall.mean, r.overall.max + 1e-12);
  }
}

TEST(SensorError, Errors) {
  const std::vector<MarkerSet> one{markers_from({0, 0, 0, 0, 0})};
  const std::vector<double> c1{3.0}, c2{3.0, 4.0};
  EXPECT_THROW(sensor_error_stats(one, one, c2, 200.0, kBuckets), MetricError);
  EXPECT_THROW(sensor_error_stats({}, {}, {}, 200.0, kBuckets), MetricError);
  EXPECT_THROW(sensor_error_stats(one, one, c1, 0.0, kBuckets), MetricError);
}

std::vector<double> first_order(double from, double to, double step_time, double tau, double dt, double duration) {
  std::vector<double> y(static_cast<std::size_t>(std::llround(duration / dt)));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) * dt;
    y[i] = t < step_time ? from : from + (to - from) * (1.0 - std::exp(-(t - step_time) / tau));
  }
  return y;
}

TEST(RiseTime, FirstOrderResponseIsTauLnNine) {
  const double dt = 1e-3;
  for (double tau : {0.1, 0.5, 0.77}) {
    const auto y = first_order(2.5, 4.5, 1.0, tau, dt, 10.0);
    const std::vector<StepEvent> steps{{1.0, 2.5, 4.5}};
    EXPECT_NEAR(rise_time(y, dt, steps), tau * std::log(9.0), 1e-5) << "tau " << tau;
  }
}

TEST(RiseTime, FallingFirstOrderResponse) {
  const double dt = 1e-3;
  const auto y = first_order(8.5, 6.5, 2.0, 0.4, dt, 8.0);
  const std::vector<StepEvent> steps{{2.0, 8.5, 6.5}};
  EXPECT_NEAR(rise_time(y, dt, steps), 0.4 * std::log(9.0), 1e-5);
}

TEST(RiseTime, InstantaneousStepIsWithinOneSample) {
  const double dt = 0.01;
  std::vector<double> y(300, 2.0);
  for (std::size_t i = 100; i < y.size(); ++i) y[i] = 4.0;
  const std::vector<StepEvent> on_time{{1.0, 2.0, 4.0}};
  EXPECT_NEAR(rise_time(y, dt, on_time), 0.0, dt);
  const std::vector<StepEvent> early{{0.5, 2.0, 4.0}};
  EXPECT_NEAR(rise_time(y, dt, early), 0.0, dt);
}

TEST(RiseTime, AveragesOverSteps) {
  const double dt = 1e-3;
  auto y = first_order(2.5, 4.5, 0.0, 0.2, dt, 5.0);
  const auto second = first_order(4.5, 6.5, 0.0, 0.6, dt, 5.0);
  y.insert(y.end(), second.begin(), second.end());
  const std::vector<StepEvent> steps{{0.0, 2.5, 4.5}, {5.0, 4.5, 6.5}};
  const auto r = rise_times(y, dt, steps);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0], 0.2 * std::log(9.0), 1e-5);
  EXPECT_NEAR(r[1], 0.6 * std::log(9.0), 1e-5);
  EXPECT_NEAR(rise_time(y, dt, steps), 0.4 * std::log(9.0), 1e-5);
}

TEST(RiseTime, Errors) {
  const std::vector<double> flat(100, 2.0);
  EXPECT_THROW(rise_time(flat, 0.01, std::vector<StepEvent>{}), MetricError);
  const std::vector<StepEvent> never{{0.1, 2.0, 4.0}};
  EXPECT_THROW(rise_time(flat, 0.01, never), MetricError);
  const std::vector<StepEvent> beyond{{5.0, 2.0, 4.0}};
  EXPECT_THROW(rise_time(flat, 0.01, beyond), MetricError);
  const std::vector<StepEvent> zero{{0.1, 2.0, 2.0}};
  EXPECT_THROW(rise_time(flat, 0.01, zero), MetricError);
}

TEST(RiseTime, CalibratedPlantUnderTruthFeedback) {
  ClosedLoopConfig cfg;
  cfg.duration = 20.0;
  const ExperimentRecord rec = run_closed_loop_truth(cfg);
  EXPECT_NEAR(rise_time(rec.truth, rec.dt, step_events(cfg.profile, cfg.duration)), 1.7, 0.1);
}

TEST(PlateauErrors, WindowBeforeEachBoundary) {
  const double dt = 0.01;
  std::vector<double> ref(1000, 3.0), act(1000);
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = ref[i] + (i < 500 ? 0.1 : -0.2);
  const std::vector<double> ends{5.0, 10.0};
  const auto e = plateau_errors(ref, act, dt, ends, 1.0);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], 0.1, 1e-12);
  EXPECT_NEAR(e[1], 0.2, 1e-12);
  const std::vector<double> early{0.5};
  EXPECT_THROW(plateau_errors(ref, act, dt, early, 1.0), MetricError);
}

TEST(Record, ValidateCatchesRaggedSeries) {
  ExperimentRecord rec;
  EXPECT_THROW(rec.validate(), MetricError);
  rec.dt = 0.1;
  EXPECT_NO_THROW(rec.validate());
  rec.t.push_back(0.0);
  EXPECT_THROW(rec.validate(), MetricError);
}

}  // namespace
}  // namespace foilskin
