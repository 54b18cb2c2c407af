#pragma once

// Watertight primitive meshes with per-cell flat colors. Every primitive sits
// with its base on z = 0 and its vertical axis on the z axis; the patterns
// differ per face so that renders from different orientations look different.

#include <string>
#include <vector>

#include "twinforge/geometry.hpp"

namespace twinforge {

TriangleMesh make_box(const Vec3& extents);
TriangleMesh make_cylinder(double radius, double height, int segments = 32);
/// Box with no lid: outer extents, wall and floor thickness `wall`.
TriangleMesh make_open_box(const Vec3& extents, double wall);
/// Hollow cylinder with a bottom.
TriangleMesh make_cup(double radius, double height, double wall, int segments = 32);
/// Wedge rising along +x from height 0 to `extents.z()`.
TriangleMesh make_ramp(const Vec3& extents);

/// Parses "box:0.1,0.1,0.1", "cylinder:r,h", "open_box:x,y,z,wall",
/// "cup:r,h,wall", "ramp:x,y,z". Throws InvalidInput on malformed specs.
TriangleMesh make_primitive(const std::string& spec);

/// Height of the mesh's top above its base (aabb z extent).
double primitive_height(const TriangleMesh& mesh);

}  // namespace twinforge
