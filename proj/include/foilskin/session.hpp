#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "foilskin/control.hpp"
#include "foilskin/plant.hpp"
#include "foilskin/sensing.hpp"

namespace foilskin {

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one named consumer of the root seed:
/// splitmix64(root XOR fnv1a64(name)).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view consumer) {
  return splitmix64(root ^ fnv1a64(consumer));
}

// Training routine: rest baseline, actuation cycles sweeping the full camber
// range, rest baseline. The plant follows a raised-cosine camber set point
// under PID control on its true camber.
struct SessionConfig {
  PlantParams plant{};
  SkinModelParams skin{};
  PidGains gains{};
  double baseline = 30.0;      // s, before and after actuation
  std::size_t cycles = 10;
  double cycle_period = 20.0;  // s
  double dt = 1.0 / 714.0;     // skin sample period
  double camera_rate = 30.0;   // Hz
};

struct Session {
  std::vector<CapacitanceFrame> frames;  // raw
  std::vector<MarkerSet> markers;        // camera-rate ground truth
  std::vector<double> marker_camber;     // true camber at each marker set
};

inline double session_setpoint(const SessionConfig& cfg, double t) {
  const double active = static_cast<double>(cfg.cycles) * cfg.cycle_period;
  const double tau = t - cfg.baseline;
  if (tau < 0.0 || tau >= active) return cfg.plant.camber_min;
  const double phase = tau / cfg.cycle_period;
  return cfg.plant.camber_min + (cfg.plant.camber_max - cfg.plant.camber_min) * 0.5 *
                                    (1.0 - std::cos(2.0 * std::numbers::pi * phase));
}

inline double session_duration(const SessionConfig& cfg) {
  return 2.0 * cfg.baseline + static_cast<double>(cfg.cycles) * cfg.cycle_period;
}

inline Session generate_session(const SessionConfig& cfg) {
  cfg.plant.validate();
  if (!(cfg.dt > 0.0) || !(cfg.camera_rate > 0.0) || !(cfg.baseline >= 0.0) || !(cfg.cycle_period > 0.0)) {
    throw ConfigError("session timing parameters must be positive");
  }
  SyntheticSkin skin(cfg.skin);
  FoilState state = plant_rest_state(cfg.plant);
  PidState pid;
  Session s;
  const double duration = session_duration(cfg);
  const auto ticks = static_cast<std::size_t>(std::llround(duration / cfg.dt));
  s.frames.reserve(ticks);
  const double camera_dt = 1.0 / cfg.camera_rate;
  std::size_t next_camera = 0;
  for (std::size_t i = 0; i < ticks; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    state.t = t;
    s.frames.push_back(skin.frame(state, t));
    // Camera frame k is taken from the skin tick closest to k / rate.
    const double cam_t = static_cast<double>(next_camera) * camera_dt;
    if (std::abs(cam_t - t) <= 0.5 * cfg.dt && cam_t < duration) {
      MarkerSet m = state.markers;
      m.t = cam_t;
      s.markers.push_back(m);
      s.marker_camber.push_back(state.camber);
      ++next_camera;
    }
    const PidOutput out = pid_step(pid, cfg.gains, session_setpoint(cfg, t), state.camber, cfg.dt);
    pid = out.state;
    state = plant_step(state, cfg.plant, out.command, cfg.dt);
  }
  return s;
}

}  // namespace foilskin
