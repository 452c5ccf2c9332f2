#pragma once

// Vocabulary shared by the arm, scene and planner modules.

#include "replab/geometry.hpp"

namespace replab {

/// Vertical parallel-jaw grasp in the robot frame: the tool tip position and
/// the horizontal angle of the jaw closing axis, measured from +x.
struct GraspPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double theta = 0.0;  // in [0, pi)

  Vec3 position() const { return {x, y, z}; }
  static GraspPose at(Vec3 p, double theta) { return {p.x, p.y, p.z, wrap_half_turn(theta)}; }
  friend bool operator==(const GraspPose&, const GraspPose&) = default;
};

/// Parallel-jaw gripper plus the parameters of the quasi-static grasp
/// outcome model.
struct GripperSpec {
  double min_width = 1.0;  // narrowest object the jaws hold [cm]
  double max_width = 3.0;  // full opening [cm]
  double jaw_length = 2.0;  // fingers reach this far below the grasp point [cm]
  double slip_tolerance = 0.75;  // max offset of the grip center from the section centroid [cm]
  double floor_clearance = 0.3;  // fingertips stop this far above the floor [cm]
  double compliance_tolerance = 0.5;  // extra width accepted for soft objects [cm]

  void validate() const {
    if (!(min_width > 0.0 && min_width < max_width))
      throw ConfigError("arm", "gripper requires 0 < min_width < max_width");
    if (!(jaw_length > 0.0 && slip_tolerance >= 0.0 && floor_clearance >= 0.0))
      throw ConfigError("arm", "gripper jaw_length, slip_tolerance, floor_clearance must be non-negative");
  }
};

}  // namespace replab
