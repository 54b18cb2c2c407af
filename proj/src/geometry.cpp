#include "twinforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "twinforge/random.hpp"

namespace twinforge {

void CameraIntrinsics::validate_projection() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("intrinsics: image size must be positive");
}

void CameraIntrinsics::validate() const {
  validate_projection();
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidInput("intrinsics: principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::rescaled(int size) const {
  const double s = static_cast<double>(size) / std::max(width, height);
  CameraIntrinsics out;
  out.fx = fx * s;
  out.fy = fy * s;
  out.cx = cx * s;
  out.cy = cy * s;
  out.width = std::max(1, static_cast<int>(std::lround(width * s)));
  out.height = std::max(1, static_cast<int>(std::lround(height * s)));
  return out;
}

std::size_t mask_count(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values.begin(), mask.values.end(), [](std::uint8_t m) { return m != 0; }));
}

namespace {

// Leaves already-unit quaternions bit-for-bit untouched so that composing with
// the identity is exact.
Eigen::Quaterniond unit(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!(n > 0.0)) throw InvalidInput("rotation quaternion has zero norm");
  return std::abs(n - 1.0) > 1e-12 ? q.normalized() : q;
}

}  // namespace

RigidPose::RigidPose(const Eigen::Quaterniond& q, const Vec3& t) : rotation(unit(q)), translation(t) {}

RigidPose::RigidPose(const Mat3& r, const Vec3& t)
    : rotation(unit(Eigen::Quaterniond(r))), translation(t) {}

RigidPose RigidPose::from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t) {
  return RigidPose(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())), t);
}

RigidPose RigidPose::from_matrix(const Mat4& m) {
  return RigidPose(Mat3(m.topLeftCorner<3, 3>()), Vec3(m.topRightCorner<3, 1>()));
}

Mat4 RigidPose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidPose RigidPose::inverse() const {
  const Eigen::Quaterniond qi = rotation.conjugate();
  return RigidPose(qi, -(qi * translation));
}

RigidPose RigidPose::operator*(const RigidPose& other) const {
  return RigidPose(rotation * other.rotation, rotation * other.translation + translation);
}

std::array<double, 7> RigidPose::to_array() const {
  return {rotation.w(), rotation.x(), rotation.y(), rotation.z(),
          translation.x(), translation.y(), translation.z()};
}

RigidPose RigidPose::from_array(const std::array<double, 7>& a) {
  return RigidPose(Eigen::Quaterniond(a[0], a[1], a[2], a[3]), Vec3(a[4], a[5], a[6]));
}

double rotation_angle_between(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double d = std::abs(a.normalized().dot(b.normalized()));
  return 2.0 * std::acos(std::min(1.0, d));
}

double quaternion_chordal_distance(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2) {
  constexpr double kTol = 1e-9;
  if (std::abs(q1.norm() - 1.0) > kTol || std::abs(q2.norm() - 1.0) > kTol) {
    throw InvalidInput("quaternion_chordal_distance: quaternions must have unit norm");
  }
  const Eigen::Vector4d a = q1.coeffs(), b = q2.coeffs();
  return std::min((a - b).norm(), (a + b).norm());
}

Aabb Aabb::empty_box() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Vec3::Constant(inf), Vec3::Constant(-inf)};
}

Vec3 PointCloud::centroid() const {
  if (points.empty()) throw InvalidInput("centroid of an empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

void PointCloud::validate() const {
  if (!colors.empty() && colors.size() != points.size()) {
    throw InvalidInput("point cloud: color count differs from point count");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw InvalidInput("point cloud: non-finite coordinate");
  }
}

double TriangleMesh::triangle_area(std::size_t i) const {
  const auto& t = triangles[i];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Vec3 TriangleMesh::triangle_normal(std::size_t i) const {
  const auto& t = triangles[i];
  return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized();
}

double TriangleMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) a += triangle_area(i);
  return a;
}

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  if (!vertex_colors.empty() && vertex_colors.size() != vertices.size()) {
    throw InvalidInput("mesh: vertex color count differs from vertex count");
  }
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const auto& t = triangles[i];
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= n) throw InvalidInput("mesh: triangle index out of range");
    }
    if (!(triangle_area(i) > 1e-12)) {
      throw InvalidInput("mesh: degenerate triangle " + std::to_string(i));
    }
  }
}

void TriangleMesh::remove_degenerate() {
  std::vector<Eigen::Vector3i> kept;
  kept.reserve(triangles.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    if (triangle_area(i) > 1e-12) kept.push_back(triangles[i]);
  }
  triangles = std::move(kept);
}

PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& intrinsics,
                       const BinaryMask* mask) {
  if (!depth.same_shape(intrinsics.width, intrinsics.height)) {
    throw InvalidInput("backproject: depth size differs from intrinsics");
  }
  if (mask != nullptr && !mask->same_shape(depth.width, depth.height)) {
    throw InvalidInput("backproject: mask size differs from depth");
  }
  PointCloud cloud;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (mask != nullptr && mask->at(u, v) == 0) continue;
      const double z = depth.at(u, v);
      if (!valid_depth(z)) continue;
      cloud.points.push_back(intrinsics.unproject(u, v, z));
    }
  }
  return cloud;
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidPose& pose) {
  PointCloud out;
  out.colors = cloud.colors;
  out.points.reserve(cloud.size());
  const Mat3 r = pose.rotation_matrix();
  for (const auto& p : cloud.points) out.points.push_back(r * p + pose.translation);
  return out;
}

TriangleMesh transform_mesh(const TriangleMesh& mesh, const RigidPose& pose) {
  TriangleMesh out = mesh;
  const Mat3 r = pose.rotation_matrix();
  for (auto& v : out.vertices) v = r * v + pose.translation;
  return out;
}

TriangleMesh transform_mesh(const TriangleMesh& mesh, const Eigen::Affine3d& map) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = map * v;
  if (map.linear().determinant() < 0.0) {
    for (auto& t : out.triangles) std::swap(t[1], t[2]);
  }
  return out;
}

Aabb compute_aabb(const std::vector<Vec3>& points) {
  if (points.empty()) throw InvalidInput("compute_aabb: empty point set");
  Aabb box = Aabb::empty_box();
  for (const auto& p : points) box.expand(p);
  return box;
}

Aabb compute_aabb(const PointCloud& cloud) { return compute_aabb(cloud.points); }

Aabb compute_aabb(const TriangleMesh& mesh) { return compute_aabb(mesh.vertices); }

PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                               std::vector<std::size_t>* source_triangles) {
  if (mesh.empty()) throw InvalidInput("sample_mesh_surface: empty mesh");
  if (n == 0) throw InvalidInput("sample_mesh_surface: n must be positive");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    total += mesh.triangle_area(i);
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw InvalidInput("sample_mesh_surface: mesh has zero area");

  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  const bool colored = !mesh.vertex_colors.empty();
  if (colored) out.colors.reserve(n);
  if (source_triangles) source_triangles->clear();
  for (std::size_t k = 0; k < n; ++k) {
    const double pick = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t tri =
        std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    double r1 = rng.uniform(), r2 = rng.uniform();
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    if (source_triangles) source_triangles->push_back(tri);
    const auto& t = mesh.triangles[tri];
    const double w0 = 1.0 - r1 - r2;
    out.points.push_back(w0 * mesh.vertices[t[0]] + r1 * mesh.vertices[t[1]] +
                         r2 * mesh.vertices[t[2]]);
    if (colored) {
      out.colors.push_back(static_cast<float>(w0) * mesh.vertex_colors[t[0]] +
                           static_cast<float>(r1) * mesh.vertex_colors[t[1]] +
                           static_cast<float>(r2) * mesh.vertex_colors[t[2]]);
    }
  }
  return out;
}

MassProperties mass_properties(const TriangleMesh& mesh) {
  // Signed tetrahedra against the origin (divergence theorem).
  double volume = 0.0;
  Vec3 moment = Vec3::Zero();
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    const double v = a.dot(b.cross(c)) / 6.0;
    volume += v;
    moment += v * (a + b + c) / 4.0;
  }
  MassProperties out;
  out.volume = volume;
  out.center_of_mass = std::abs(volume) > 0.0 ? Vec3(moment / volume) : Vec3::Zero();
  return out;
}

double mesh_diameter(const TriangleMesh& mesh) { return compute_aabb(mesh).extent().norm(); }

}  // namespace twinforge
