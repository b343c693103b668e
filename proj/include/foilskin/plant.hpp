#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "foilskin/errors.hpp"
#include "foilskin/geometry.hpp"

namespace foilskin {

// Syringe actuator. The command sets the piston velocity through a
// first-order lag; pressure integrates the velocity and its slew rate drops
// linearly with pressure (the linear actuator slows against load).
struct ActuatorParams {
  double max_rate = 0.2;        // 1/s, pressure slew at zero load
  double load_slowdown = 0.6;   // fraction of slew lost at full pressure
  double velocity_gain = 2.0;   // 1/s, pressure rate per unit velocity
  double tau = 0.05;            // s, velocity lag

  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("actuator tau must be positive");
    if (!(max_rate > 0.0)) throw ConfigError("actuator max_rate must be positive");
    if (!(velocity_gain > 0.0)) throw ConfigError("actuator velocity_gain must be positive");
    if (!(load_slowdown >= 0.0 && load_slowdown < 1.0)) {
      throw ConfigError("actuator load_slowdown must lie in [0, 1)");
    }
  }
};

struct ActuatorState {
  double command = 0.0;   // [-1, 1]
  double velocity = 0.0;  // lagged command
  double pressure = 0.0;  // [0, 1]
};

inline double slew_limit(const ActuatorParams& params, double pressure) {
  return params.max_rate * (1.0 - params.load_slowdown * pressure);
}

inline ActuatorState actuator_step(const ActuatorState& state, const ActuatorParams& params,
                                   double command, double dt) {
  if (!(dt > 0.0)) throw UsageError("actuator_step: dt must be positive");
  ActuatorState next = state;
  next.command = std::clamp(command, -1.0, 1.0);
  const double blend = -std::expm1(-dt / params.tau);
  next.velocity = state.velocity + (next.command - state.velocity) * blend;
  const double limit = slew_limit(params, state.pressure);
  const double rate = std::clamp(params.velocity_gain * next.velocity, -limit, limit);
  next.pressure = std::clamp(state.pressure + rate * dt, 0.0, 1.0);
  return next;
}

struct PlantParams {
  FoilGeometry geometry{};
  ActuatorParams actuator{};
  double camber_min = 2.0;  // percent at zero pressure
  double camber_max = 9.0;  // percent at full pressure
  // Quadratic blend: camber fraction = p + blend * (p - p^2). |blend| <= 1
  // keeps the map monotone.
  double pressure_blend = 0.2;
  double tip_per_percent = 5.0;  // mm of tip deflection per camber percent
  double shape_camber_limit = 10.0;
  std::array<double, kMarkerCount> marker_stations{80.0, 110.0, 140.0, 170.0, 200.0};

  void validate() const {
    geometry.validate();
    actuator.validate();
    if (geometry.leading_edge != PlanarPoint{0.0, 0.0} || geometry.silicone_start.y != 0.0 ||
        !(geometry.silicone_start.x > 0.0)) {
      throw ConfigError("plant geometry expects the leading edge at the origin and the silicone "
                        "start on the positive x axis");
    }
    if (!(camber_min >= 0.0 && camber_max > camber_min && camber_max <= shape_camber_limit)) {
      throw ConfigError("plant camber range must satisfy 0 <= min < max <= shape limit");
    }
    if (!(std::abs(pressure_blend) <= 1.0)) throw ConfigError("pressure_blend must lie in [-1, 1]");
    if (!(tip_per_percent > 0.0)) throw ConfigError("tip_per_percent must be positive");
    double prev = geometry.silicone_start.x;
    for (double s : marker_stations) {
      if (!(s > prev)) throw ConfigError("marker stations must increase beyond the silicone start");
      prev = s;
    }
    if (marker_stations.back() > geometry.chord_length) {
      throw ConfigError("marker stations must not pass the chord length");
    }
  }
};

inline double pressure_to_camber(double pressure, const PlantParams& params) {
  const double p = std::clamp(pressure, 0.0, 1.0);
  const double fraction = p + params.pressure_blend * (p - p * p);
  return params.camber_min + (params.camber_max - params.camber_min) * fraction;
}

/// Tail deflection y(x) = tip * ((1 - beta) xi^2 + beta xi^3), clamped flat at
/// the silicone start, with xi running 0..1 from silicone start to trailing
/// edge. The nose ahead of the silicone start stays on y = 0.
struct TailShape {
  double start = 50.0;  // silicone start x
  double end = 200.0;   // trailing edge x
  double tip = 0.0;     // mm
  double beta = 0.0;

  double xi(double x) const { return (x - start) / (end - start); }

  double y(double x) const {
    if (x <= start) return 0.0;
    const double s = xi(x);
    return tip * s * s * ((1.0 - beta) + beta * s);
  }
  double slope(double x) const {
    if (x <= start) return 0.0;
    const double s = xi(x);
    return tip * (2.0 * (1.0 - beta) * s + 3.0 * beta * s * s) / (end - start);
  }
  double second_derivative(double x) const {
    if (x <= start) return 0.0;
    const double s = xi(x);
    const double h = end - start;
    return tip * (2.0 * (1.0 - beta) + 6.0 * beta * s) / (h * h);
  }
  double curvature(double x) const {
    const double d1 = slope(x);
    return second_derivative(x) / std::pow(1.0 + d1 * d1, 1.5);
  }

  double arc_length(double x0, double x1) const {
    if (x1 < x0) return -arc_length(x1, x0);
    if (x0 < start && x1 > start) return (start - x0) + arc_length(start, x1);
    if (x1 <= start) return x1 - x0;
    // 5-point Gauss-Legendre on a polynomial-slope integrand.
    static constexpr std::array<double, 5> nodes{0.0, -0.5384693101056831, 0.5384693101056831,
                                                 -0.9061798459386640, 0.9061798459386640};
    static constexpr std::array<double, 5> weights{0.5688888888888889, 0.4786286704993665,
                                                   0.4786286704993665, 0.2369268850561891,
                                                   0.2369268850561891};
    const double half = 0.5 * (x1 - x0);
    const double mid = 0.5 * (x1 + x0);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d1 = slope(mid + half * nodes[i]);
      sum += weights[i] * std::sqrt(1.0 + d1 * d1);
    }
    return half * sum;
  }
};

namespace detail {

// max over the tail of x/L - w(xi) for the chord to (L, tip); closed form via
// the stationary point of a concave cubic.
inline double tail_peak_factor(double start, double end, double beta) {
  const double a = (end - start) / end;
  double xi = 0.0;
  if (std::abs(beta) < 1e-12) {
    xi = 0.5 * a;
  } else {
    const double b = 1.0 - beta;
    xi = (-b + std::sqrt(b * b + 3.0 * beta * a)) / (3.0 * beta);
  }
  xi = std::clamp(xi, 0.0, 1.0);
  const double x = start + xi * (end - start);
  const double w = xi * xi * ((1.0 - beta) + beta * xi);
  return std::max(start / end, x / end - w);
}

}  // namespace detail

/// Exact camber of a tail shape, as a percentage of `chord_length`.
inline double tail_shape_camber(const TailShape& shape, double chord_length) {
  const double factor = detail::tail_peak_factor(shape.start, shape.end, shape.beta);
  return 100.0 * std::abs(shape.tip) * shape.end * factor /
         (std::hypot(shape.end, shape.tip) * chord_length);
}

struct FoilShape {
  MarkerSet markers;
  double tip_deflection = 0.0;
  TailShape tail;
};

/// Shape with exactly the requested camber and tip deflection
/// `tip_per_percent * camber`; the cubic weight beta absorbs the chord tilt.
inline FoilShape foil_shape(double camber, const PlantParams& params) {
  if (!(camber >= 0.0 && camber <= params.shape_camber_limit)) {
    throw UsageError("foil_shape: camber outside [0, " +
                     std::to_string(params.shape_camber_limit) + "] percent");
  }
  TailShape tail;
  tail.start = params.geometry.silicone_start.x;
  tail.end = params.marker_stations.back();
  tail.tip = params.tip_per_percent * camber;
  const double target = params.geometry.chord_length * std::hypot(tail.end, tail.tip) /
                        (100.0 * params.tip_per_percent * tail.end);
  // beta >= -0.5 keeps the tail profile concave relative to the chord.
  double lo = -0.5, hi = 1.0;
  auto factor = [&](double beta) {
    return detail::tail_peak_factor(tail.start, tail.end, beta);
  };
  if (factor(lo) > target || factor(hi) < target) {
    throw GeometryError("tail shape family cannot realise the requested camber");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (factor(mid) < target ? lo : hi) = mid;
  }
  tail.beta = 0.5 * (lo + hi);

  FoilShape shape;
  shape.tail = tail;
  shape.tip_deflection = tail.tip;
  for (std::size_t i = 0; i < kMarkerCount; ++i) {
    const double x = params.marker_stations[i];
    shape.markers.points[i] = {x, tail.y(x)};
  }
  return shape;
}

struct FoilState {
  double t = 0.0;
  ActuatorState actuator{};
  double camber = 0.0;
  double tip_deflection = 0.0;
  MarkerSet markers{};
  TailShape tail{};
};

inline FoilState plant_state_at(double t, const ActuatorState& actuator, const PlantParams& params) {
  FoilState state;
  state.t = t;
  state.actuator = actuator;
  state.camber = pressure_to_camber(actuator.pressure, params);
  FoilShape shape = foil_shape(state.camber, params);
  state.tip_deflection = shape.tip_deflection;
  state.markers = shape.markers;
  state.markers.t = t;
  state.tail = shape.tail;
  return state;
}

/// Resting plant: zero pressure, which sits at the minimum camber.
inline FoilState plant_rest_state(const PlantParams& params) {
  return plant_state_at(0.0, ActuatorState{}, params);
}

inline FoilState plant_step(const FoilState& state, const PlantParams& params, double command,
                            double dt) {
  const ActuatorState next = actuator_step(state.actuator, params.actuator, command, dt);
  return plant_state_at(state.t + dt, next, params);
}

}  // namespace foilskin
