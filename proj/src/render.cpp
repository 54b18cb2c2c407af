#include "twinforge/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "twinforge/io.hpp"

namespace twinforge {

namespace {

struct Raster {
  Eigen::Vector2d p;  // raster coordinates: pixel (u, v) spans [u, u+1) x [v, v+1)
  double inv_z;
  Vec3 cam;
};

double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Interior lies where edge() > 0; see the orientation fix-up below.
bool is_top_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

class Rasterizer {
 public:
  Rasterizer(const CameraIntrinsics& k, const RenderOptions& opt, bool labeled)
      : k_(k), opt_(opt), labeled_(labeled) {
    k.validate_projection();
    view_.intrinsics = k;
    view_.rgb = ColorImage(k.width, k.height, opt.background);
    view_.depth = DepthImage(k.width, k.height, 0.0);
    zbuf_.assign(view_.depth.size(), std::numeric_limits<double>::infinity());
    if (labeled_) {
      object_id_ = Image<int>(k.width, k.height, -1);
      triangle_id_ = Image<int>(k.width, k.height, -1);
    }
  }

  void draw(const TriangleMesh& mesh, const RigidPose& cam_from_mesh, int object) {
    const Mat3 r = cam_from_mesh.rotation_matrix();
    const Vec3& t = cam_from_mesh.translation;
    const bool colored = !mesh.vertex_colors.empty();
    const Color white(1.0f, 1.0f, 1.0f);
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
      const auto& tri = mesh.triangles[ti];
      std::array<Raster, 3> v;
      std::array<Color, 3> c;
      bool rejected = false;
      for (int i = 0; i < 3; ++i) {
        const Vec3 pc = r * mesh.vertices[tri[i]] + t;
        if (pc.z() <= opt_.near_plane) {
          rejected = true;
          break;
        }
        v[i].cam = pc;
        v[i].inv_z = 1.0 / pc.z();
        v[i].p = Eigen::Vector2d(k_.fx * pc.x() / pc.z() + k_.cx + 0.5,
                                 k_.fy * pc.y() / pc.z() + k_.cy + 0.5);
        c[i] = colored ? mesh.vertex_colors[tri[i]] : white;
      }
      if (rejected) continue;
      double area = edge(v[0].p, v[1].p, v[2].p);
      if (area == 0.0 || !std::isfinite(area)) continue;
      if (area < 0.0) {
        std::swap(v[1], v[2]);
        std::swap(c[1], c[2]);
        area = -area;
      }
      const Vec3 normal = (v[1].cam - v[0].cam).cross(v[2].cam - v[0].cam);
      const double normal_len = normal.norm();
      if (!(normal_len > 0.0)) continue;
      const Vec3 n = normal / normal_len;

      const double min_x = std::min({v[0].p.x(), v[1].p.x(), v[2].p.x()});
      const double max_x = std::max({v[0].p.x(), v[1].p.x(), v[2].p.x()});
      const double min_y = std::min({v[0].p.y(), v[1].p.y(), v[2].p.y()});
      const double max_y = std::max({v[0].p.y(), v[1].p.y(), v[2].p.y()});
      const int u0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
      const int u1 = std::min(k_.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
      const int w0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
      const int w1 = std::min(k_.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
      if (u0 > u1 || w0 > w1) continue;

      const bool tl0 = is_top_left(v[1].p, v[2].p);
      const bool tl1 = is_top_left(v[2].p, v[0].p);
      const bool tl2 = is_top_left(v[0].p, v[1].p);
      const double inv_area = 1.0 / area;

      for (int py = w0; py <= w1; ++py) {
        for (int px = u0; px <= u1; ++px) {
          const Eigen::Vector2d s(px + 0.5, py + 0.5);
          const double e0 = edge(v[1].p, v[2].p, s);
          const double e1 = edge(v[2].p, v[0].p, s);
          const double e2 = edge(v[0].p, v[1].p, s);
          if (!((e0 > 0.0 || (e0 == 0.0 && tl0)) && (e1 > 0.0 || (e1 == 0.0 && tl1)) &&
                (e2 > 0.0 || (e2 == 0.0 && tl2)))) {
            continue;
          }
          const double l0 = e0 * inv_area, l1 = e1 * inv_area, l2 = e2 * inv_area;
          const double inv_z = l0 * v[0].inv_z + l1 * v[1].inv_z + l2 * v[2].inv_z;
          const double z = 1.0 / inv_z;
          const std::size_t idx = static_cast<std::size_t>(py) * k_.width + px;
          if (!(z < zbuf_[idx])) continue;
          zbuf_[idx] = z;

          const double a0 = l0 * v[0].inv_z * z, a1 = l1 * v[1].inv_z * z, a2 = l2 * v[2].inv_z * z;
          const Color base = static_cast<float>(a0) * c[0] + static_cast<float>(a1) * c[1] +
                             static_cast<float>(a2) * c[2];
          const Vec3 point = k_.unproject(px, py, z);
          const double lambert = std::abs(n.dot(point.normalized()));
          const float shade = opt_.ambient + (1.0f - opt_.ambient) * static_cast<float>(lambert);
          view_.rgb.values[idx] = (base * shade).cwiseMax(0.0f).cwiseMin(1.0f);
          view_.depth.values[idx] = z;
          if (labeled_) {
            object_id_.values[idx] = object;
            triangle_id_.values[idx] = static_cast<int>(ti);
          }
        }
      }
    }
  }

  RenderedView take_view(const RigidPose& pose) {
    view_.pose = pose;
    return std::move(view_);
  }

  LabeledView take_labeled(const RigidPose& pose) {
    LabeledView out;
    out.object_id = std::move(object_id_);
    out.triangle_id = std::move(triangle_id_);
    out.view = take_view(pose);
    return out;
  }

 private:
  const CameraIntrinsics& k_;
  const RenderOptions& opt_;
  bool labeled_;
  RenderedView view_;
  std::vector<double> zbuf_;
  Image<int> object_id_;
  Image<int> triangle_id_;
};

}  // namespace

RenderedView render(const TriangleMesh& mesh, const RigidPose& pose,
                    const CameraIntrinsics& intrinsics, const RenderOptions& options) {
  Rasterizer r(intrinsics, options, false);
  r.draw(mesh, pose, 0);
  return r.take_view(pose);
}

RenderedView render_scene(std::span<const PosedMesh> objects, const RigidPose& view_pose,
                          const CameraIntrinsics& intrinsics, const RenderOptions& options) {
  Rasterizer r(intrinsics, options, false);
  const RigidPose cam_from_world = view_pose.inverse();
  for (std::size_t i = 0; i < objects.size(); ++i) {
    r.draw(*objects[i].mesh, cam_from_world * objects[i].pose, static_cast<int>(i));
  }
  return r.take_view(view_pose);
}

LabeledView render_scene_labeled(std::span<const PosedMesh> objects, const RigidPose& view_pose,
                                 const CameraIntrinsics& intrinsics, const RenderOptions& options) {
  Rasterizer r(intrinsics, options, true);
  const RigidPose cam_from_world = view_pose.inverse();
  for (std::size_t i = 0; i < objects.size(); ++i) {
    r.draw(*objects[i].mesh, cam_from_world * objects[i].pose, static_cast<int>(i));
  }
  return r.take_labeled(view_pose);
}

BinaryMask coverage_mask(const RenderedView& view) {
  BinaryMask mask(view.depth.width, view.depth.height);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.values[i] = valid_depth(view.depth.values[i]);
  return mask;
}

void dump_view(const std::filesystem::path& prefix, const RenderedView& view) {
  io::write_ppm(prefix.string() + "_rgb.ppm", view.rgb);
  io::write_depth_pgm(prefix.string() + "_depth.pgm", view.depth);
}

}  // namespace twinforge
