#pragma once

#include <array>
#include <cmath>

#include "aloq/common.hpp"

namespace aloq {

/// Planar 3-link arm. Joint commands live in [0,1] per joint and map affinely
/// to angles in radians; angles accumulate along the chain and the base sits
/// at the origin. The constants were calibrated numerically so that over the
/// unit command cube the tip's x-coordinate spans [-0.54, 0.89], the collision
/// policy's lowest joint x is about -0.097, and both reference targets sit in
/// the middle of the workspace with room for the inverse-kinematics families
/// the tasks rely on.
struct ArmGeometry {
  std::array<double, 3> length{0.477, 0.477, 0.477};
  std::array<double, 3> offset{1.181960, 1.991757, -1.065508};
  std::array<double, 3> slope{-0.831014, -0.698921, -0.968660};

  static const ArmGeometry& standard() {
    static const ArmGeometry g;
    return g;
  }

  double angle(int i, double joint) const { return offset[i] + slope[i] * joint; }
};

struct ArmPose {
  Eigen::Vector2d p1, p2, p3;  // joint positions along the chain; p3 is the tip

  Eigen::Vector2d tip() const { return p3; }
  /// Lowest x among the joint positions (the mount itself is housed and does
  /// not participate in collision tests).
  double min_x() const { return std::min(p1.x(), std::min(p2.x(), p3.x())); }
};

/// Forward kinematics by cumulative angles. Inputs are not clamped: the unit
/// cube is the tasks' command domain, but the chain itself is defined for any
/// real joints (diagnostics evaluate it at the zero-angle preimages, which lie
/// outside the cube).
inline ArmPose arm_fk(const Vec& joints, const ArmGeometry& g = ArmGeometry::standard()) {
  ArmPose pose;
  double a = 0.0;
  Eigen::Vector2d at(0.0, 0.0);
  Eigen::Vector2d* out[3] = {&pose.p1, &pose.p2, &pose.p3};
  for (int i = 0; i < 3; ++i) {
    a += g.angle(i, joints[i]);
    at += g.length[i] * Eigen::Vector2d(std::cos(a), std::sin(a));
    *out[i] = at;
  }
  return pose;
}

inline Eigen::Vector2d arm_tip(const Vec& joints,
                               const ArmGeometry& g = ArmGeometry::standard()) {
  return arm_fk(joints, g).tip();
}

}  // namespace aloq
