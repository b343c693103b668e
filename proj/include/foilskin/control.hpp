#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "foilskin/errors.hpp"
#include "foilskin/estimator.hpp"
#include "foilskin/geometry.hpp"
#include "foilskin/metrics.hpp"
#include "foilskin/plant.hpp"
#include "foilskin/sensing.hpp"

namespace foilskin {

inline double unit_triangle(double phase) {
  if (phase < 0.25) return 4.0 * phase;
  if (phase < 0.75) return 2.0 - 4.0 * phase;
  return 4.0 * phase - 4.0;
}

/// Set point in percent camber. Periodic profiles start at the mean, rising.
inline double setpoint_at(const SetpointProfile& profile, double t) {
  switch (profile.kind) {
    case ProfileKind::step: {
      // The epsilon keeps tick times like 3570/714 on the intended plateau.
      const double steps = std::floor(t / profile.step_dwell + 1e-9);
      return std::min(profile.step_start + profile.step_increment * steps, profile.step_end);
    }
    case ProfileKind::sine: {
      const double phase = t / profile.period - std::floor(t / profile.period);
      return profile.mean + 0.5 * profile.peak_to_peak * std::sin(2.0 * std::numbers::pi * phase);
    }
    case ProfileKind::triangle: {
      const double phase = t / profile.period - std::floor(t / profile.period);
      return profile.mean + 0.5 * profile.peak_to_peak * unit_triangle(phase);
    }
  }
  return profile.mean;
}

/// Set-point jumps of a step profile up to `duration`.
inline std::vector<StepEvent> step_events(const SetpointProfile& profile, double duration) {
  std::vector<StepEvent> out;
  if (profile.kind != ProfileKind::step) return out;
  double level = profile.step_start;
  for (int k = 1;; ++k) {
    const double t = profile.step_dwell * k;
    if (t >= duration) break;
    const double next = std::min(profile.step_start + profile.step_increment * k, profile.step_end);
    if (next == level) break;
    out.push_back({t, level, next});
    level = next;
  }
  return out;
}

// Gains act on camber error in per-unit (percent / 100).
struct PidGains {
  double kp = 50.0;
  double ki = 1.0;
  double kd = 1.0;
};

struct PidState {
  double integral = 0.0;          // per-unit error * s
  double filtered_error = 0.0;
  bool primed = false;            // false until the first sample
  double derivative_cutoff = 10.0;  // Hz
  double output_limit = 1.0;
  double integral_limit = 1.0;
};

struct PidOutput {
  double command = 0.0;
  PidState state;
  double p_term = 0.0, i_term = 0.0, d_term = 0.0;
};

/// One controller tick. The integral only advances while the output is
/// unsaturated; the derivative acts on a first-order filtered error.
inline PidOutput pid_step(const PidState& state, const PidGains& gains, double setpoint,
                          double measurement, double dt) {
  if (!(dt > 0.0)) throw UsageError("pid_step: dt must be positive");
  const double error = (setpoint - measurement) / 100.0;
  PidOutput out;
  out.state = state;
  double derivative = 0.0;
  if (state.primed) {
    const double rc = 1.0 / (2.0 * std::numbers::pi * state.derivative_cutoff);
    const double alpha = dt / (dt + rc);
    out.state.filtered_error = state.filtered_error + alpha * (error - state.filtered_error);
    derivative = (out.state.filtered_error - state.filtered_error) / dt;
  } else {
    out.state.filtered_error = error;
    out.state.primed = true;
  }
  out.p_term = gains.kp * error;
  out.i_term = gains.ki * state.integral;
  out.d_term = gains.kd * derivative;
  const double raw = out.p_term + out.i_term + out.d_term;
  out.command = std::clamp(raw, -state.output_limit, state.output_limit);
  if (raw == out.command) {
    out.state.integral =
        std::clamp(state.integral + error * dt, -state.integral_limit, state.integral_limit);
  }
  return out;
}

struct ClosedLoopConfig {
  SetpointProfile profile{};
  PlantParams plant{};
  SkinModelParams skin{};
  PidGains gains{};
  PidState pid{};
  double duration = 30.0;        // s
  double dt = 1.0 / 714.0;       // s
  double baseline_duration = 5.0;  // s of rest frames before the run
  double initial_pressure = 0.0;   // actuator state at t = 0, after the baseline
};

namespace detail {

template <typename Feedback>
ExperimentRecord run_loop(const ClosedLoopConfig& cfg, Feedback&& feedback) {
  cfg.plant.validate();
  if (!(cfg.dt > 0.0) || !(cfg.duration > 0.0)) throw ConfigError("closed loop needs positive dt and duration");
  SyntheticSkin skin(cfg.skin);
  FoilState state = plant_rest_state(cfg.plant);

  const auto baseline_ticks =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.baseline_duration / cfg.dt)));
  std::vector<CapacitanceFrame> baseline;
  baseline.reserve(baseline_ticks);
  for (std::size_t i = 0; i < baseline_ticks; ++i) {
    baseline.push_back(skin.frame(state, -cfg.baseline_duration + static_cast<double>(i) * cfg.dt));
  }
  const BaselineReference ref = compute_baseline(baseline);
  if (!(cfg.initial_pressure >= 0.0 && cfg.initial_pressure <= 1.0)) {
    throw ConfigError("initial pressure must lie in [0, 1]");
  }
  state = plant_state_at(0.0, ActuatorState{0.0, 0.0, cfg.initial_pressure}, cfg.plant);

  const auto ticks = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  ExperimentRecord rec;
  rec.dt = cfg.dt;
  rec.profile = cfg.profile;
  rec.t.reserve(ticks);
  rec.setpoint.reserve(ticks);
  rec.estimate.reserve(ticks);
  rec.truth.reserve(ticks);
  rec.command.reserve(ticks);

  PidState pid = cfg.pid;
  double last_estimate = state.camber;
  for (std::size_t i = 0; i < ticks; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    state.t = t;
    const CapacitanceFrame frame = normalize_frame(skin.frame(state, t), ref);
    double estimate = last_estimate;
    if (!feedback(state, frame, estimate)) ++rec.estimate_faults;
    last_estimate = estimate;
    const double sp = setpoint_at(cfg.profile, t);
    const PidOutput out = pid_step(pid, cfg.gains, sp, estimate, cfg.dt);
    pid = out.state;
    rec.t.push_back(t);
    rec.setpoint.push_back(sp);
    rec.estimate.push_back(estimate);
    rec.truth.push_back(state.camber);
    rec.command.push_back(out.command);
    state = plant_step(state, cfg.plant, out.command, cfg.dt);
  }
  return rec;
}

}  // namespace detail

/// Closed loop with the skin and shape estimator as the only feedback:
/// truth -> skin frame -> normalize -> MLP -> camber -> PID -> plant.
inline ExperimentRecord run_closed_loop(const ClosedLoopConfig& cfg, const MlpModel& model) {
  if (model.input_size() != kChannelCount || model.output_size() != kTargetCount) {
    throw UsageError("closed loop: model must map 9 channels to 10 marker coordinates");
  }
  const FoilGeometry& geometry = cfg.plant.geometry;
  return detail::run_loop(cfg, [&](const FoilState&, const CapacitanceFrame& frame, double& estimate) {
    try {
      estimate = markers_to_camber(estimate_markers(model, frame), geometry);
      return true;
    } catch (const GeometryError&) {
      return false;  // hold the previous estimate
    }
  });
}

/// Same loop with the plant's true camber as feedback (camera wiring).
inline ExperimentRecord run_closed_loop_truth(const ClosedLoopConfig& cfg) {
  return detail::run_loop(cfg, [](const FoilState& s, const CapacitanceFrame&, double& estimate) {
    estimate = s.camber;
    return true;
  });
}

inline std::string format_record(const ExperimentRecord& rec) {
  std::string out = "t,setpoint,estimate,truth,command\n";
  out.reserve(rec.size() * 64);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    csv::append_time(out, rec.t[i]);
    for (double v : {rec.setpoint[i], rec.estimate[i], rec.truth[i], rec.command[i]}) {
      out += ',';
      csv::append_value(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace foilskin
