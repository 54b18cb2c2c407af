#pragma once

// Core geometric types shared by every stage: camera model, images, rigid
// poses, point clouds, and triangle meshes.
//
// Frames: the camera frame is +x right, +y down, +z forward. World frames used
// by the simulator are z-up with the ground plane at z = 0.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "twinforge/error.hpp"

namespace twinforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Color = Eigen::Vector3f;

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidInput unless fx, fy > 0 and the principal point lies inside
  /// the image.
  void validate() const;
  /// Positive focal lengths and image size only; crops of a larger view may
  /// put the principal point outside the image.
  void validate_projection() const;

  /// Same field of view at a different resolution (longest side = `size`).
  CameraIntrinsics rescaled(int size) const;

  /// Pixel coordinates (u, v) of a camera-frame point with z > 0.
  Eigen::Vector2d project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  /// Camera-frame point at depth z along the ray through (u, v).
  Vec3 unproject(double u, double v, double z) const {
    return {(u - cx) * z / fx, (v - cy) * z / fy, z};
  }
};

/// Row-major image of `T`.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const {
    return values[static_cast<std::size_t>(v) * width + u];
  }
  std::size_t size() const { return values.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
};

/// Depth in meters; 0 or NaN marks an invalid pixel.
using DepthImage = Image<double>;
/// RGB with channels in [0, 1].
using ColorImage = Image<Color>;
/// Nonzero = selected.
using BinaryMask = Image<std::uint8_t>;

inline bool valid_depth(double z) { return z > 0.0 && z == z; }

std::size_t mask_count(const BinaryMask& mask);

/// Element of SE(3): x -> R x + t with unit quaternion R stored as [w x y z].
struct RigidPose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  RigidPose() = default;
  RigidPose(const Eigen::Quaterniond& q, const Vec3& t);
  RigidPose(const Mat3& r, const Vec3& t);

  static RigidPose identity() { return {}; }
  static RigidPose from_translation(const Vec3& t) {
    return RigidPose(Eigen::Quaterniond::Identity(), t);
  }
  static RigidPose from_axis_angle(const Vec3& axis, double angle_rad,
                                   const Vec3& t = Vec3::Zero());
  static RigidPose from_matrix(const Mat4& m);

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
  Mat4 matrix() const;
  RigidPose inverse() const;

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  /// Composition: (a * b)(x) = a(b(x)).
  RigidPose operator*(const RigidPose& other) const;

  /// [w, x, y, z, tx, ty, tz]
  std::array<double, 7> to_array() const;
  static RigidPose from_array(const std::array<double, 7>& a);
};

/// Geodesic rotation angle between two poses' rotations, in radians.
double rotation_angle_between(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

/// min(|q1 - q2|, |q1 + q2|). Throws InvalidInput on non-unit input.
double quaternion_chordal_distance(const Eigen::Quaterniond& q1,
                                   const Eigen::Quaterniond& q2);

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  static Aabb empty_box();
};

struct PointCloud {
  std::vector<Vec3> points;
  /// Either empty or one color per point.
  std::vector<Color> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }
  Vec3 centroid() const;
  void validate() const;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> triangles;
  /// Either empty or one color per vertex.
  std::vector<Color> vertex_colors;

  bool empty() const { return triangles.empty(); }
  double triangle_area(std::size_t i) const;
  Vec3 triangle_normal(std::size_t i) const;
  double surface_area() const;
  /// Throws InvalidInput on out-of-range indices, degenerate triangles, or a
  /// color array of the wrong length.
  void validate() const;
  /// Drops triangles with area <= 1e-12 m^2.
  void remove_degenerate();
};

PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& intrinsics,
                       const BinaryMask* mask = nullptr);

PointCloud transform_cloud(const PointCloud& cloud, const RigidPose& pose);
TriangleMesh transform_mesh(const TriangleMesh& mesh, const RigidPose& pose);
TriangleMesh transform_mesh(const TriangleMesh& mesh, const Eigen::Affine3d& map);

Aabb compute_aabb(const PointCloud& cloud);
Aabb compute_aabb(const std::vector<Vec3>& points);
Aabb compute_aabb(const TriangleMesh& mesh);

/// Area-weighted uniform samples over the mesh surface. Colors are
/// interpolated when the mesh carries vertex colors. `source_triangles`, when
/// given, receives the triangle each sample came from.
PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                               std::vector<std::size_t>* source_triangles = nullptr);

/// Enclosed volume and center of mass assuming uniform density; the mesh must
/// be closed and consistently oriented.
struct MassProperties {
  double volume = 0.0;
  Vec3 center_of_mass = Vec3::Zero();
};
MassProperties mass_properties(const TriangleMesh& mesh);

/// Largest distance between two points, estimated through the AABB diagonal.
double mesh_diameter(const TriangleMesh& mesh);

}  // namespace twinforge
