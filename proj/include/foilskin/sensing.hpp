#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "foilskin/errors.hpp"
#include "foilskin/plant.hpp"

namespace foilskin {

inline constexpr std::size_t kChannelCount = 9;
inline constexpr std::size_t kElectrodeCount = 6;

struct ElectrodePair {
  int a = 0;
  int b = 0;
  friend bool operator==(const ElectrodePair&, const ElectrodePair&) = default;
};

/// The nine electrode pairs read by the skin, in log column order.
inline constexpr std::array<ElectrodePair, kChannelCount> canonical_pairs() {
  return {{{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 5}, {4, 6}, {5, 6}}};
}

inline constexpr std::array<std::string_view, kChannelCount> kChannelNames{
    "c12", "c13", "c23", "c24", "c34", "c35", "c45", "c46", "c56"};

enum class FrameKind { raw, normalized };

using ChannelValues = std::array<double, kChannelCount>;

struct CapacitanceFrame {
  double t = 0.0;
  ChannelValues values{};
  FrameKind kind = FrameKind::raw;
};

struct BaselineReference {
  ChannelValues c_emp{};

  void validate() const {
    for (std::size_t i = 0; i < kChannelCount; ++i) {
      if (!(c_emp[i] > 0.0) || !std::isfinite(c_emp[i])) {
        throw CalibrationError("reference channel " + std::string(kChannelNames[i]) +
                               " is not strictly positive");
      }
    }
  }
};

/// c = (c' - c_emp) / c_emp per channel.
inline CapacitanceFrame normalize_frame(const CapacitanceFrame& raw, const BaselineReference& ref) {
  if (raw.kind != FrameKind::raw) throw UsageError("normalize_frame expects a raw frame");
  ref.validate();
  CapacitanceFrame out{raw.t, {}, FrameKind::normalized};
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    out.values[i] = (raw.values[i] - ref.c_emp[i]) / ref.c_emp[i];
  }
  return out;
}

/// Per-channel mean of a pre-actuation window.
inline BaselineReference compute_baseline(std::span<const CapacitanceFrame> frames) {
  if (frames.empty()) throw CalibrationError("baseline window is empty");
  ChannelValues sum{};
  for (const auto& f : frames) {
    if (f.kind != FrameKind::raw) throw UsageError("baseline frames must be raw");
    for (std::size_t i = 0; i < kChannelCount; ++i) sum[i] += f.values[i];
  }
  BaselineReference ref;
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    ref.c_emp[i] = sum[i] / static_cast<double>(frames.size());
  }
  ref.validate();
  return ref;
}

// Synthetic skin. Each pair reads
//   gain * d0 / (d + kappa * |curvature at midpoint| * length_scale)
// times (1 + relative Gaussian noise), where d is the arc length between the
// two electrodes on the deformed camber line and d0 its undeformed value.
struct SkinModelParams {
  std::array<double, kElectrodeCount> stations{62.0, 86.0, 110.0, 134.0, 158.0, 182.0};  // mm
  ChannelValues gains{10.0, 4.0, 10.0, 4.0, 10.0, 4.0, 10.0, 4.0, 10.0};                // pF
  double curvature_sensitivity = 10.0;  // mm
  double length_scale = 200.0;          // mm
  double noise_std = 0.005;             // relative
  std::uint64_t seed = 1;

  void validate() const {
    for (std::size_t i = 1; i < kElectrodeCount; ++i) {
      if (!(stations[i] > stations[i - 1])) {
        throw ConfigError("skin electrode stations must be strictly increasing");
      }
    }
    for (double g : gains) {
      if (!(g > 0.0)) throw ConfigError("skin gains must be positive");
    }
    if (!(noise_std >= 0.0)) throw ConfigError("skin noise_std must be non-negative");
    if (!(curvature_sensitivity >= 0.0)) throw ConfigError("skin curvature_sensitivity must be >= 0");
  }
};

/// Noise-free pair readings for a tail shape.
inline ChannelValues ideal_capacitance(const TailShape& tail, const SkinModelParams& params) {
  ChannelValues out{};
  const auto pairs = canonical_pairs();
  for (std::size_t k = 0; k < kChannelCount; ++k) {
    const double xa = params.stations[static_cast<std::size_t>(pairs[k].a - 1)];
    const double xb = params.stations[static_cast<std::size_t>(pairs[k].b - 1)];
    const double rest = xb - xa;
    const double arc = tail.arc_length(xa, xb);
    const double bend = std::abs(tail.curvature(0.5 * (xa + xb)));
    out[k] = params.gains[k] * rest /
             (arc + params.curvature_sensitivity * bend * params.length_scale);
  }
  return out;
}

/// Seeded generator of raw frames. Single owner: the noise stream advances
/// with every frame.
class SyntheticSkin {
 public:
  explicit SyntheticSkin(SkinModelParams params) : params_(params), rng_(params.seed) {
    params_.validate();
  }

  CapacitanceFrame frame(const FoilState& state, double t) {
    CapacitanceFrame f{t, ideal_capacitance(state.tail, params_), FrameKind::raw};
    if (params_.noise_std > 0.0) {
      for (double& v : f.values) {
        // Floor keeps raw readings positive under extreme draws.
        v *= std::max(1e-3, 1.0 + params_.noise_std * normal_(rng_));
      }
    }
    return f;
  }

  const SkinModelParams& params() const { return params_; }

 private:
  SkinModelParams params_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// One-shot frame from a fresh generator seeded by `params.seed`.
inline CapacitanceFrame synth_capacitance(const FoilState& state, const SkinModelParams& params,
                                          double t) {
  SyntheticSkin skin(params);
  return skin.frame(state, t);
}

}  // namespace foilskin
