#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace covrecon {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec5 = Eigen::Matrix<Scalar, 5, 1>;

/// Slot order of a 5-D pose or velocity: x, y, z, yaw, pitch.
enum Axis : int { kX = 0, kY = 1, kZ = 2, kYaw = 3, kPitch = 4 };

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle into [-pi, pi).
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar r = std::fmod(a + std::numbers::pi_v<Scalar>, two_pi);
  if (r < Scalar(0)) r += two_pi;
  r -= std::numbers::pi_v<Scalar>;
  // fmod can land exactly on +pi after the shift for inputs near -pi.
  if (r >= std::numbers::pi_v<Scalar>) r -= two_pi;
  return r;
}

/// Shortest signed difference a - b on the circle.
template <typename Scalar>
Scalar angle_difference(Scalar a, Scalar b) {
  return wrap_angle(a - b);
}

/// Unit viewing direction for yaw/pitch with pitch measured upward
/// (observation points: the direction the surface faces).
template <typename Scalar>
Vec3<Scalar> upward_direction(Scalar theta_h, Scalar theta_v) {
  const Scalar cv = std::cos(theta_v);
  return {std::cos(theta_h) * cv, std::sin(theta_h) * cv, std::sin(theta_v)};
}

/// Camera optical axis for yaw/pitch with pitch measured downward.
template <typename Scalar>
Vec3<Scalar> camera_direction(Scalar theta_h, Scalar theta_v) {
  const Scalar cv = std::cos(theta_v);
  return {std::cos(theta_h) * cv, std::sin(theta_h) * cv, -std::sin(theta_v)};
}

/// Pose of one drone: position of the camera and gimbal yaw/pitch.
template <typename Scalar>
class DroneState {
 public:
  DroneState() : pose_(Vec5<Scalar>::Zero()) { pose_[kPitch] = std::numbers::pi_v<Scalar> / 2; }

  DroneState(Scalar x, Scalar y, Scalar z, Scalar theta_h, Scalar theta_v)
      : DroneState(Vec5<Scalar>(x, y, z, theta_h, theta_v)) {}

  explicit DroneState(const Vec5<Scalar>& pose) : pose_(pose) {
    if (!pose_.allFinite()) throw GeometryError("drone state must be finite");
    if (!(pose_[kPitch] > Scalar(0)) || pose_[kPitch] > std::numbers::pi_v<Scalar> / 2)
      throw GeometryError("drone pitch must lie in (0, pi/2]");
    pose_[kYaw] = wrap_angle(pose_[kYaw]);
  }

  /// Advances by a velocity over dt. Yaw is re-wrapped; pitch is left to the
  /// barrier constraints and is not re-validated here.
  [[nodiscard]] DroneState integrated(const Vec5<Scalar>& velocity, Scalar dt) const {
    DroneState next;
    next.pose_ = pose_ + velocity * dt;
    next.pose_[kYaw] = wrap_angle(next.pose_[kYaw]);
    return next;
  }

  const Vec5<Scalar>& pose() const { return pose_; }
  Scalar x() const { return pose_[kX]; }
  Scalar y() const { return pose_[kY]; }
  Scalar z() const { return pose_[kZ]; }
  Scalar theta_h() const { return pose_[kYaw]; }
  Scalar theta_v() const { return pose_[kPitch]; }

  Vec3<Scalar> position() const { return pose_.template head<3>(); }
  Vec2<Scalar> angles() const { return pose_.template tail<2>(); }
  Vec3<Scalar> direction() const { return camera_direction(theta_h(), theta_v()); }

  bool operator==(const DroneState&) const = default;

 private:
  Vec5<Scalar> pose_;
};

template <typename Scalar>
using VelocityInput = Vec5<Scalar>;

/// Representative point of one virtual-field cell.
template <typename Scalar>
struct ObservationPoint {
  Vec3<Scalar> position = Vec3<Scalar>::Zero();
  Scalar theta_h = 0;
  Scalar theta_v = std::numbers::pi_v<Scalar> / 2;
  std::size_t cell_index = 0;

  Vec2<Scalar> angles() const { return {theta_h, theta_v}; }
  Vec3<Scalar> direction() const { return upward_direction(theta_h, theta_v); }
};

/// Position / angle / direction triple of a pose.
template <typename Scalar>
struct Projections {
  Vec3<Scalar> position;
  Vec2<Scalar> angles;
  Vec3<Scalar> direction;
};

template <typename Scalar>
Projections<Scalar> state_projections(const DroneState<Scalar>& p) {
  return {p.position(), p.angles(), p.direction()};
}

template <typename Scalar>
Projections<Scalar> state_projections(const ObservationPoint<Scalar>& q) {
  return {q.position, q.angles(), q.direction()};
}

/// Closed axis-aligned box.
template <typename Scalar>
struct Region {
  Vec3<Scalar> min;
  Vec3<Scalar> max;

  Region(const Vec3<Scalar>& lo, const Vec3<Scalar>& hi) : min(lo), max(hi) {
    if (!lo.allFinite() || !hi.allFinite()) throw GeometryError("region bounds must be finite");
    if ((lo.array() >= hi.array()).any()) throw GeometryError("region requires min < max on every axis");
  }

  Vec3<Scalar> extent() const { return max - min; }
  Vec3<Scalar> center() const { return (min + max) / Scalar(2); }

  bool operator==(const Region&) const = default;
};

template <typename Scalar>
bool region_contains(const Region<Scalar>& r, const Vec3<Scalar>& pos) {
  return (pos.array() >= r.min.array()).all() && (pos.array() <= r.max.array()).all();
}

/// Uniform cell count on one axis: ceil(extent / resolution), at least 1.
/// A relative slack absorbs representation error (6 / 0.3 must give 20).
template <typename Scalar>
std::size_t axis_cell_count(Scalar extent, Scalar resolution) {
  if (!(resolution > Scalar(0))) throw GeometryError("resolution must be positive");
  if (!(extent > Scalar(0))) throw GeometryError("empty extent");
  const Scalar ratio = extent / resolution;
  const auto count = static_cast<std::size_t>(std::ceil(ratio * (Scalar(1) - Scalar(1e-12))));
  return count < 1 ? 1 : count;
}

/// Angle interval [lo, hi]. For yaw a full-circle interval wraps.
template <typename Scalar>
struct AngleRange {
  Scalar lo;
  Scalar hi;
  Scalar extent() const { return hi - lo; }
  bool operator==(const AngleRange&) const = default;
};

/// The discretized 5-D observation lattice B x yaw-range x pitch-range.
///
/// Cells are ordered x-major, then y, z, yaw, pitch (pitch fastest). All
/// cells sharing a spatial cell are contiguous, so the spatial index of cell j
/// is j / angle_cells().
template <typename Scalar>
class VirtualField {
 public:
  VirtualField(const Region<Scalar>& target, AngleRange<Scalar> yaw, AngleRange<Scalar> pitch,
               const Vec5<Scalar>& resolution)
      : region_(target), yaw_(yaw), pitch_(pitch), resolution_(resolution) {
    if ((resolution.array() <= Scalar(0)).any()) throw GeometryError("resolution must be positive on every axis");
    if (!(yaw.extent() > 0) || !(pitch.extent() > 0)) throw GeometryError("empty angle range");
    const Vec3<Scalar> ext = target.extent();
    const std::array<Scalar, 5> extents{ext[0], ext[1], ext[2], yaw.extent(), pitch.extent()};
    const std::array<Scalar, 5> lows{target.min[0], target.min[1], target.min[2], yaw.lo, pitch.lo};
    for (int a = 0; a < 5; ++a) {
      counts_[a] = axis_cell_count(extents[a], resolution[a]);
      lows_[a] = lows[a];
      widths_[a] = extents[a] / static_cast<Scalar>(counts_[a]);
    }
    const std::size_t total = size();
    points_.reserve(total);
    std::size_t index = 0;
    for (std::size_t ix = 0; ix < counts_[0]; ++ix)
      for (std::size_t iy = 0; iy < counts_[1]; ++iy)
        for (std::size_t iz = 0; iz < counts_[2]; ++iz)
          for (std::size_t ih = 0; ih < counts_[3]; ++ih)
            for (std::size_t iv = 0; iv < counts_[4]; ++iv) {
              ObservationPoint<Scalar> q;
              q.position = {center(0, ix), center(1, iy), center(2, iz)};
              q.theta_h = center(3, ih);
              q.theta_v = center(4, iv);
              q.cell_index = index++;
              points_.push_back(q);
            }
  }

  std::size_t size() const { return counts_[0] * counts_[1] * counts_[2] * counts_[3] * counts_[4]; }
  std::size_t spatial_cells() const { return counts_[0] * counts_[1] * counts_[2]; }
  std::size_t angle_cells() const { return counts_[3] * counts_[4]; }
  std::size_t spatial_index(std::size_t cell) const { return cell / angle_cells(); }
  const std::array<std::size_t, 5>& counts() const { return counts_; }

  const Region<Scalar>& region() const { return region_; }
  const AngleRange<Scalar>& yaw_range() const { return yaw_; }
  const AngleRange<Scalar>& pitch_range() const { return pitch_; }
  const Vec5<Scalar>& resolution() const { return resolution_; }
  const std::vector<ObservationPoint<Scalar>>& points() const { return points_; }
  const ObservationPoint<Scalar>& operator[](std::size_t j) const { return points_[j]; }

  /// Position of spatial cell s (shared by its angle_cells() members).
  Vec3<Scalar> spatial_position(std::size_t s) const { return points_[s * angle_cells()].position; }

  /// Cell containing the 5-D point. Yaw wraps when the yaw range is a full
  /// circle; other axes clamp onto the closed range. Throws when the point is
  /// outside the field.
  std::size_t locate(const Vec3<Scalar>& pos, Scalar theta_h, Scalar theta_v) const {
    const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    Scalar yaw = theta_h;
    if (yaw_.extent() >= two_pi * (Scalar(1) - Scalar(1e-12))) {
      yaw = yaw_.lo + std::fmod(std::fmod(yaw - yaw_.lo, two_pi) + two_pi, two_pi);
    }
    const std::array<Scalar, 5> v{pos[0], pos[1], pos[2], yaw, theta_v};
    std::size_t index = 0;
    for (int a = 0; a < 5; ++a) {
      const Scalar hi = lows_[a] + widths_[a] * static_cast<Scalar>(counts_[a]);
      if (v[a] < lows_[a] || v[a] > hi) throw GeometryError("point outside the virtual field");
      auto k = static_cast<std::size_t>(std::floor((v[a] - lows_[a]) / widths_[a]));
      if (k >= counts_[a]) k = counts_[a] - 1;
      index = index * counts_[a] + k;
    }
    return index;
  }

 private:
  Scalar center(int axis, std::size_t k) const {
    return lows_[axis] + (static_cast<Scalar>(k) + Scalar(0.5)) * widths_[axis];
  }

  Region<Scalar> region_;
  AngleRange<Scalar> yaw_;
  AngleRange<Scalar> pitch_;
  Vec5<Scalar> resolution_;
  std::array<std::size_t, 5> counts_{};
  std::array<Scalar, 5> lows_{};
  std::array<Scalar, 5> widths_{};
  std::vector<ObservationPoint<Scalar>> points_;
};

template <typename Scalar>
VirtualField<Scalar> discretize_virtual_field(const Region<Scalar>& target, AngleRange<Scalar> yaw,
                                              AngleRange<Scalar> pitch, const Vec5<Scalar>& resolution) {
  return VirtualField<Scalar>(target, yaw, pitch, resolution);
}

using DroneStated = DroneState<double>;
using ObservationPointd = ObservationPoint<double>;
using Regiond = Region<double>;
using VirtualFieldd = VirtualField<double>;
using Vec3d = Vec3<double>;
using Vec5d = Vec5<double>;

}  // namespace covrecon
