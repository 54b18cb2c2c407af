#pragma once

#include <vector>

#include "twinforge/render.hpp"

namespace twinforge {

/// Result of simulating one placement, in world coordinates.
struct SimOutcome {
  /// One pose per scene object, in scene order.
  std::vector<RigidPose> settled_poses;
  bool stable = false;
  bool penetration = false;
  int topple_steps = 0;
  /// Center-of-mass height of the manipulated object before and after.
  double initial_com_z = 0.0;
  double settled_com_z = 0.0;
  /// View from the checker camera; empty when rendering is disabled.
  RenderedView rendered;
};

}  // namespace twinforge
