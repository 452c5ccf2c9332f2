#pragma once

// Kinematics of the ceiling-mounted 6-DOF arm.
//
// Joint layout: base yaw about the vertical axis, then shoulder, elbow and
// wrist pitch in the vertical plane through the base axis (0 = link pointing
// straight down, positive swings away from the base axis), then wrist roll
// about the tool axis, then the gripper opening in cm.

#include <array>
#include <cmath>
#include <span>

#include "replab/geometry.hpp"
#include "replab/grasp.hpp"

namespace replab {

inline constexpr std::size_t kJointCount = 6;

enum Joint : std::size_t { kBaseYaw = 0, kShoulder, kElbow, kWristPitch, kWristRoll, kGripper };

struct JointState {
  std::array<double, kJointCount> q{0.0, 0.0, 0.0, 0.0, 0.0, 3.0};

  double& operator[](std::size_t i) { return q[i]; }
  double operator[](std::size_t i) const { return q[i]; }
  friend bool operator==(const JointState&, const JointState&) = default;
};

struct JointLimits {
  std::array<double, kJointCount> lower{-1.5 * kPi, -2.0, 0.0, -kPi, -0.5 * kPi, 1.0};
  std::array<double, kJointCount> upper{1.5 * kPi, 2.0, 2.8, kPi, 0.5 * kPi, 3.0};

  bool contains(const JointState& js, double tol = 1e-12) const {
    for (std::size_t i = 0; i < kJointCount; ++i)
      if (js[i] < lower[i] - tol || js[i] > upper[i] + tol) return false;
    return true;
  }
  friend bool operator==(const JointLimits&, const JointLimits&) = default;
};

/// Nominal link lengths of a small hobby-grade arm; these are configurable
/// assumptions, not vendor values.
struct ArmModel {
  double base_height = 24.0;  // shoulder pivot above the floor [cm]
  double upper_arm = 15.0;    // shoulder to elbow
  double forearm = 15.0;      // elbow to wrist
  double tool = 11.0;         // wrist to gripper tip
  JointLimits limits{};
  double max_joint_velocity = 1.0;  // rad/s (cm/s for the gripper)

  void validate() const {
    if (!(upper_arm > 0.0 && forearm > 0.0 && tool > 0.0 && base_height > 0.0))
      throw ConfigError("arm", "link lengths must be positive");
    for (std::size_t i = 0; i < kJointCount; ++i)
      if (!(limits.lower[i] < limits.upper[i])) throw ConfigError("arm", "joint limits must satisfy lower < upper");
    if (!(max_joint_velocity > 0.0)) throw ConfigError("arm", "max joint velocity must be positive");
  }
  friend bool operator==(const ArmModel&, const ArmModel&) = default;
};

struct FkResult {
  Vec3 end_effector;
  double wrist_roll = 0.0;  // horizontal angle of the jaw closing axis, in [0, pi)
  Mat3 tool_rotation;       // tool frame; the tool points along -z of this frame
};

namespace detail {
/// Rotation swinging the link direction (0, 0, -1) toward +x by `q`.
inline Mat3 pitch(double q) { return rot_y(-q); }
}  // namespace detail

/// Forward kinematics by chaining the rigid link transforms.
inline FkResult fk(const ArmModel& m, const JointState& js) {
  RigidTransform t = RigidTransform::translate({0.0, 0.0, m.base_height});
  t = t * RigidTransform::rotate(rot_z(js[kBaseYaw]));
  t = t * RigidTransform::rotate(detail::pitch(js[kShoulder]));
  t = t * RigidTransform::translate({0.0, 0.0, -m.upper_arm});
  t = t * RigidTransform::rotate(detail::pitch(js[kElbow]));
  t = t * RigidTransform::translate({0.0, 0.0, -m.forearm});
  t = t * RigidTransform::rotate(detail::pitch(js[kWristPitch]));
  t = t * RigidTransform::translate({0.0, 0.0, -m.tool});
  t = t * RigidTransform::rotate(rot_z(js[kWristRoll]));
  const Vec3 closing = t.rotation.col(0);
  return {t.translation, wrap_half_turn(std::atan2(closing.y, closing.x)), t.rotation};
}

/// Angle between the tool axis and straight down.
inline double tool_tilt(const FkResult& r) {
  const Vec3 axis = r.tool_rotation * Vec3{0.0, 0.0, -1.0};
  return std::acos(std::clamp(-axis.z, -1.0, 1.0));
}

/// Closed-form IK with the tool pointing straight down and the jaw closing
/// axis at world angle `theta`. Uses the elbow-down branch (elbow >= 0).
inline JointState ik_vertical(const ArmModel& m, Vec3 target, double theta, double gripper_opening = 3.0) {
  JointState js;
  const double r = std::hypot(target.x, target.y);
  js[kBaseYaw] = r < 1e-12 ? 0.0 : std::atan2(target.y, target.x);
  // Wrist center in the arm plane: depth below the shoulder and radial reach.
  const double down = m.base_height - (target.z + m.tool);
  const double reach2 = down * down + r * r;
  const double c2 = (reach2 - m.upper_arm * m.upper_arm - m.forearm * m.forearm) / (2.0 * m.upper_arm * m.forearm);
  if (!(std::abs(c2) <= 1.0)) throw ReachabilityError("arm", "target outside the reachable envelope");
  js[kElbow] = std::acos(c2);
  js[kShoulder] = std::atan2(r, down) -
                  std::atan2(m.forearm * std::sin(js[kElbow]), m.upper_arm + m.forearm * std::cos(js[kElbow]));
  js[kWristPitch] = -(js[kShoulder] + js[kElbow]);
  // Jaws are symmetric under a half turn, so the roll is chosen within +-pi/2.
  double roll = wrap_full_turn(theta - js[kBaseYaw]);
  if (roll >= 0.5 * kPi) roll -= kPi;
  if (roll < -0.5 * kPi) roll += kPi;
  js[kWristRoll] = roll;
  js[kGripper] = gripper_opening;
  if (!m.limits.contains(js, 1e-9)) throw ReachabilityError("arm", "IK solution violates joint limits");
  return js;
}

inline bool reachable(const ArmModel& m, Vec3 target) {
  try {
    (void)ik_vertical(m, target, 0.0);
    return true;
  } catch (const ReachabilityError&) {
    return false;
  }
}

/// Clamped Euler step of the joint angles under velocity command `qdot`.
inline JointState step_velocity(const ArmModel& m, const JointState& js, std::span<const double, kJointCount> qdot,
                                double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("arm", "step_velocity: dt must be positive");
  JointState out = js;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const double v = std::clamp(qdot[i], -m.max_joint_velocity, m.max_joint_velocity);
    out[i] = std::clamp(js[i] + v * dt, m.limits.lower[i], m.limits.upper[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noisy position control

/// Linear controller distortion q = alpha * p + beta on the horizontal
/// coordinates (beta shared by x and y), plus the fit residual.
struct NoiseModel {
  double alpha = 1.0;
  double beta = 0.0;
  double residual = 0.0;
  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

struct ControlNoise {
  NoiseModel distortion{};
  double sigma_xy = 0.4;  // residual noise, horizontal [cm]
  double sigma_z = 0.2;   // residual noise, vertical [cm]
  friend bool operator==(const ControlNoise&, const ControlNoise&) = default;
};

/// Position actually reached when commanding `target`. The controller lands
/// on the distorted point, so that is the one the arm has to reach.
inline Vec3 command_position(const ArmModel& m, const ControlNoise& noise, Vec3 target, double theta, Seed seed) {
  const double a = noise.distortion.alpha, b = noise.distortion.beta;
  (void)ik_vertical(m, {a * target.x + b, a * target.y + b, target.z}, theta);
  Rng rng(seed.stream("arm/control-noise"));
  const double ex = rng.normal(noise.sigma_xy);
  const double ey = rng.normal(noise.sigma_xy);
  const double ez = rng.normal(noise.sigma_z);
  return {a * target.x + b + ex, a * target.y + b + ey, target.z + ez};
}

}  // namespace replab
