#pragma once

// Three-DoF neck envelope. Angles in degrees; the total mechanical ranges
// (150 deg yaw, 30 deg pitch, 30 deg roll) are split symmetrically about the
// neutral pose.

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "visage/error.hpp"

namespace visage {

struct NeckLimits {
  static constexpr double yaw = 75.0;
  static constexpr double pitch = 15.0;
  static constexpr double roll = 15.0;
};

struct NeckPose {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  bool within_limits() const {
    return std::abs(yaw) <= NeckLimits::yaw && std::abs(pitch) <= NeckLimits::pitch &&
           std::abs(roll) <= NeckLimits::roll;
  }
  friend bool operator==(const NeckPose&, const NeckPose&) = default;
};

struct ClampedPose {
  NeckPose pose;
  bool yaw_clamped = false;
  bool pitch_clamped = false;
  bool roll_clamped = false;

  bool any_clamped() const { return yaw_clamped || pitch_clamped || roll_clamped; }
};

inline ClampedPose clamp_neck(double yaw, double pitch, double roll) {
  if (!std::isfinite(yaw) || !std::isfinite(pitch) || !std::isfinite(roll)) {
    throw Error(ErrorCode::NonFiniteInput, "neck pose must be finite");
  }
  ClampedPose out;
  out.pose.yaw = std::clamp(yaw, -NeckLimits::yaw, NeckLimits::yaw);
  out.pose.pitch = std::clamp(pitch, -NeckLimits::pitch, NeckLimits::pitch);
  out.pose.roll = std::clamp(roll, -NeckLimits::roll, NeckLimits::roll);
  out.yaw_clamped = out.pose.yaw != yaw;
  out.pitch_clamped = out.pose.pitch != pitch;
  out.roll_clamped = out.pose.roll != roll;
  return out;
}

inline ClampedPose clamp_neck(const NeckPose& raw) { return clamp_neck(raw.yaw, raw.pitch, raw.roll); }

/// Yaw/pitch (degrees) that aim the +z forward axis from `from` at `to`.
/// Positive yaw turns toward +x, positive pitch toward +y (up).
struct AimAngles {
  double yaw = 0.0;
  double pitch = 0.0;
};

inline AimAngles aim_angles(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  const Eigen::Vector3d d = to - from;
  if (!d.allFinite()) throw Error(ErrorCode::NonFiniteInput, "target must be finite");
  if (d.norm() < 1e-12) throw Error(ErrorCode::DegenerateTarget, "target coincides with origin");
  constexpr double kDeg = 180.0 / std::numbers::pi;
  return {std::atan2(d.x(), d.z()) * kDeg, std::atan2(d.y(), std::hypot(d.x(), d.z())) * kDeg};
}

/// Head set-point facing `target`, roll fixed at zero, clamped to the envelope.
inline ClampedPose pose_toward(const Eigen::Vector3d& target, const Eigen::Vector3d& head_origin) {
  const auto aim = aim_angles(head_origin, target);
  return clamp_neck(aim.yaw, aim.pitch, 0.0);
}

}  // namespace visage
