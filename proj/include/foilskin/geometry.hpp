#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "foilskin/errors.hpp"

namespace foilskin {

inline constexpr std::size_t kMarkerCount = 5;
inline constexpr std::size_t kCamberPointCount = kMarkerCount + 1;
inline constexpr std::size_t kCamberSamples = 512;

/// Planar coordinate in millimetres.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend PlanarPoint operator+(PlanarPoint a, PlanarPoint b) { return {a.x + b.x, a.y + b.y}; }
  friend PlanarPoint operator-(PlanarPoint a, PlanarPoint b) { return {a.x - b.x, a.y - b.y}; }
  friend PlanarPoint operator*(double s, PlanarPoint p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

inline double dot(PlanarPoint a, PlanarPoint b) { return a.x * b.x + a.y * b.y; }
inline double cross(PlanarPoint a, PlanarPoint b) { return a.x * b.y - a.y * b.x; }
inline double norm(PlanarPoint p) { return std::hypot(p.x, p.y); }

/// Fixed geometry of the foil. The angle of attack is carried for
/// completeness; nothing in the library actuates or reads it.
struct FoilGeometry {
  double chord_length = 200.0;
  PlanarPoint leading_edge{0.0, 0.0};
  double angle_of_attack = 0.0;  // rad
  PlanarPoint silicone_start{50.0, 0.0};

  void validate() const {
    if (!(chord_length > 0.0) || !std::isfinite(chord_length)) {
      throw GeometryError("chord length must be positive");
    }
  }
};

/// Tracked marker coordinates for one camera frame, nose-adjacent first and
/// trailing edge last.
struct MarkerSet {
  double t = 0.0;
  std::array<PlanarPoint, kMarkerCount> points{};

  PlanarPoint trailing_edge() const { return points.back(); }
};

// Natural cubic spline y(u) through strictly increasing knots.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline() = default;

  NaturalCubicSpline(std::vector<double> knots, std::vector<double> values)
      : u_(std::move(knots)), v_(std::move(values)) {
    const std::size_t n = u_.size();
    if (n < 2 || v_.size() != n) {
      throw GeometryError("spline needs at least two knots with matching values");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) {
        throw GeometryError("spline knots must be finite");
      }
      if (i > 0 && !(u_[i] > u_[i - 1])) {
        throw GeometryError("chordwise coordinates must be strictly increasing");
      }
    }
    solve_second_derivatives();
  }

  double operator()(double u) const {
    const std::size_t i = interval(u);
    const double h = u_[i + 1] - u_[i];
    const double a = u_[i + 1] - u;
    const double b = u - u_[i];
    return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) +
           (v_[i] / h - m_[i] * h / 6.0) * a + (v_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
  }

  double derivative(double u) const {
    const std::size_t i = interval(u);
    const double h = u_[i + 1] - u_[i];
    const double a = u_[i + 1] - u;
    const double b = u - u_[i];
    return -m_[i] * a * a / (2.0 * h) + m_[i + 1] * b * b / (2.0 * h) +
           (v_[i + 1] - v_[i]) / h - (m_[i + 1] - m_[i]) * h / 6.0;
  }

  double front() const { return u_.front(); }
  double back() const { return u_.back(); }
  std::span<const double> knots() const { return u_; }
  std::span<const double> values() const { return v_; }
  std::span<const double> second_derivatives() const { return m_; }

 private:
  std::size_t interval(double u) const {
    auto it = std::upper_bound(u_.begin(), u_.end(), u);
    std::size_t i = it == u_.begin() ? 0 : static_cast<std::size_t>(it - u_.begin()) - 1;
    return std::min(i, u_.size() - 2);
  }

  // Tridiagonal system for the interior second derivatives, M_0 = M_{n-1} = 0.
  void solve_second_derivatives() {
    const std::size_t n = u_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t i = j + 1;
      const double h0 = u_[i] - u_[i - 1];
      const double h1 = u_[i + 1] - u_[i];
      diag[j] = 2.0 * (h0 + h1);
      upper[j] = h1;
      rhs[j] = 6.0 * ((v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0);
    }
    for (std::size_t j = 1; j < k; ++j) {
      const double lower = u_[j + 1] - u_[j];
      const double w = lower / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t j = k - 1; j-- > 0;) {
      m_[j + 1] = (rhs[j] - upper[j] * m_[j + 2]) / diag[j];
    }
  }

  std::vector<double> u_, v_, m_;
};

/// Camber line through the silicone-start anchor and the five markers.
///
/// The spline is built in a local frame whose abscissa runs from the first to
/// the last control point, so the fitted curve is independent of where the
/// foil sits in the camera frame. "Chordwise coordinate" below always means
/// the projection onto that anchor-to-trailing-edge direction.
class CamberLine {
 public:
  CamberLine() = default;

  explicit CamberLine(std::span<const PlanarPoint> points) {
    if (points.size() != kCamberPointCount) {
      throw GeometryError("camber line needs exactly 6 control points");
    }
    std::copy(points.begin(), points.end(), control_.begin());
    origin_ = control_.front();
    const PlanarPoint span = control_.back() - origin_;
    const double length = norm(span);
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw GeometryError("anchor and trailing edge coincide");
    }
    axis_ = (1.0 / length) * span;
    std::vector<double> u(kCamberPointCount), v(kCamberPointCount);
    for (std::size_t i = 0; i < kCamberPointCount; ++i) {
      const PlanarPoint d = control_[i] - origin_;
      u[i] = dot(d, axis_);
      v[i] = cross(axis_, d);
    }
    spline_ = NaturalCubicSpline(std::move(u), std::move(v));
  }

  PlanarPoint at(double chordwise) const {
    const double v = spline_(chordwise);
    return origin_ + chordwise * axis_ + v * normal();
  }

  double chordwise_begin() const { return spline_.front(); }
  double chordwise_end() const { return spline_.back(); }
  const std::array<PlanarPoint, kCamberPointCount>& control_points() const { return control_; }
  const NaturalCubicSpline& spline() const { return spline_; }
  PlanarPoint axis() const { return axis_; }
  PlanarPoint normal() const { return {-axis_.y, axis_.x}; }
  PlanarPoint origin() const { return origin_; }

 private:
  std::array<PlanarPoint, kCamberPointCount> control_{};
  PlanarPoint origin_{};
  PlanarPoint axis_{1.0, 0.0};
  NaturalCubicSpline spline_;
};

inline CamberLine fit_camber_spline(std::span<const PlanarPoint> points) {
  return CamberLine(points);
}

struct ChordLine {
  PlanarPoint origin;
  PlanarPoint direction;  // unit
  double length = 0.0;
};

inline ChordLine chord_line(PlanarPoint leading_edge, PlanarPoint trailing_edge) {
  const PlanarPoint d = trailing_edge - leading_edge;
  const double length = norm(d);
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw GeometryError("leading and trailing edge coincide");
  }
  return {leading_edge, (1.0 / length) * d, length};
}

inline ChordLine chord_line(const FoilGeometry& geometry, PlanarPoint trailing_edge) {
  return chord_line(geometry.leading_edge, trailing_edge);
}

/// Positive on the left of the chord direction.
inline double signed_distance(PlanarPoint p, const ChordLine& chord) {
  return cross(chord.direction, p - chord.origin);
}

inline double perpendicular_distance(PlanarPoint p, const ChordLine& chord) {
  return std::abs(signed_distance(p, chord));
}

struct CamberMeasurement {
  double percent = 0.0;
  // +1 when the maximum lies left of the leading-to-trailing-edge direction,
  // -1 when right, 0 for a straight line.
  int side = 0;
  double chordwise = 0.0;
  PlanarPoint location{};
};

/// Maximum perpendicular distance between camber line and chord line, as a
/// percentage of the configured chord length. The maximum is taken over
/// `samples` uniform chordwise stations; ties go to the smaller station.
inline CamberMeasurement measure_camber(const CamberLine& line, const FoilGeometry& geometry,
                                        PlanarPoint trailing_edge,
                                        std::size_t samples = kCamberSamples) {
  geometry.validate();
  if (samples < 2) throw UsageError("camber search needs at least two samples");
  const ChordLine chord = chord_line(geometry, trailing_edge);
  const double u0 = line.chordwise_begin();
  const double u1 = line.chordwise_end();
  const double step = (u1 - u0) / static_cast<double>(samples - 1);
  CamberMeasurement best;
  double best_distance = -1.0;
  double best_signed = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double u = i + 1 == samples ? u1 : u0 + step * static_cast<double>(i);
    const PlanarPoint p = line.at(u);
    const double s = signed_distance(p, chord);
    if (std::abs(s) > best_distance) {
      best_distance = std::abs(s);
      best_signed = s;
      best.chordwise = u;
      best.location = p;
    }
  }
  best.percent = 100.0 * best_distance / geometry.chord_length;
  best.side = best_signed > 0.0 ? 1 : (best_signed < 0.0 ? -1 : 0);
  return best;
}

inline double camber_percent(const CamberLine& line, const FoilGeometry& geometry,
                             PlanarPoint trailing_edge) {
  return measure_camber(line, geometry, trailing_edge).percent;
}

inline std::array<PlanarPoint, kCamberPointCount> camber_control_points(
    const MarkerSet& markers, const FoilGeometry& geometry) {
  std::array<PlanarPoint, kCamberPointCount> pts{};
  pts[0] = geometry.silicone_start;
  std::copy(markers.points.begin(), markers.points.end(), pts.begin() + 1);
  return pts;
}

inline double markers_to_camber(const MarkerSet& markers, const FoilGeometry& geometry) {
  const auto pts = camber_control_points(markers, geometry);
  return camber_percent(fit_camber_spline(pts), geometry, markers.trailing_edge());
}

}  // namespace foilskin
