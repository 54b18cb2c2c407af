#include "twinforge/primitives.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace twinforge {

namespace {

using Ring = std::vector<Vec3>;
using CellColor = std::function<Color(int k, int j)>;

constexpr int kCells = 8;

Color gray(double l) { return Color::Constant(static_cast<float>(std::clamp(l, 0.0, 1.0))); }

class Builder {
 public:
  void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Color& color) {
    const int base = static_cast<int>(mesh_.vertices.size());
    for (const Vec3* p : {&a, &b, &c, &d}) {
      mesh_.vertices.push_back(*p);
      mesh_.vertex_colors.push_back(color);
    }
    mesh_.triangles.emplace_back(base, base + 1, base + 2);
    mesh_.triangles.emplace_back(base, base + 2, base + 3);
  }

  void triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Color& color) {
    const int base = static_cast<int>(mesh_.vertices.size());
    for (const Vec3* p : {&a, &b, &c}) {
      mesh_.vertices.push_back(*p);
      mesh_.vertex_colors.push_back(color);
    }
    mesh_.triangles.emplace_back(base, base + 1, base + 2);
  }

  TriangleMesh finish() {
    mesh_.remove_degenerate();
    return std::move(mesh_);
  }

 private:
  TriangleMesh mesh_;
};

/// Counter-clockwise (seen from above) rectangle boundary, `per_side` points
/// per side starting at (hx, -hy); side s covers points [s*per_side, (s+1)*per_side).
Ring rect_ring(double hx, double hy, double z, int per_side) {
  const Vec3 corners[4] = {{hx, -hy, z}, {hx, hy, z}, {-hx, hy, z}, {-hx, -hy, z}};
  Ring ring;
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < per_side; ++i) {
      const double t = static_cast<double>(i) / per_side;
      ring.push_back((1.0 - t) * corners[s] + t * corners[(s + 1) % 4]);
    }
  }
  return ring;
}

Ring circle_ring(double r, double z, int segments) {
  Ring ring;
  for (int k = 0; k < segments; ++k) {
    const double phi = 2.0 * M_PI * k / segments;
    ring.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return ring;
}

/// Band between two rings; the normal is tangent x (b - a), which points
/// outward when the profile runs counter-clockwise around the material.
void add_wall(Builder& b, const Ring& lower, const Ring& upper, int rows, const CellColor& color) {
  const std::size_t m = lower.size();
  for (int j = 0; j < rows; ++j) {
    const double t0 = static_cast<double>(j) / rows, t1 = static_cast<double>(j + 1) / rows;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t k1 = (k + 1) % m;
      const Vec3 a = (1 - t0) * lower[k] + t0 * upper[k];
      const Vec3 bb = (1 - t0) * lower[k1] + t0 * upper[k1];
      const Vec3 c = (1 - t1) * lower[k1] + t1 * upper[k1];
      const Vec3 d = (1 - t1) * lower[k] + t1 * upper[k];
      b.quad(a, bb, c, d, color(static_cast<int>(k), j));
    }
  }
}

void add_rect_cap(Builder& b, double hx, double hy, double z, bool up, const CellColor& color) {
  for (int j = 0; j < kCells; ++j) {
    for (int i = 0; i < kCells; ++i) {
      const double x0 = -hx + 2 * hx * i / kCells, x1 = -hx + 2 * hx * (i + 1) / kCells;
      const double y0 = -hy + 2 * hy * j / kCells, y1 = -hy + 2 * hy * (j + 1) / kCells;
      const Vec3 p00(x0, y0, z), p10(x1, y0, z), p11(x1, y1, z), p01(x0, y1, z);
      if (up) {
        b.quad(p00, p10, p11, p01, color(i, j));
      } else {
        b.quad(p00, p01, p11, p10, color(i, j));
      }
    }
  }
}

void add_disc_cap(Builder& b, double r, double z, int segments, bool up, const CellColor& color) {
  constexpr int kRings = 3;
  for (int i = 0; i < kRings; ++i) {
    const Ring inner = circle_ring(r * i / kRings, z, segments);
    const Ring outer = circle_ring(r * (i + 1) / kRings, z, segments);
    for (int k = 0; k < segments; ++k) {
      const int k1 = (k + 1) % segments;
      const Color c = color(k, i);
      if (i == 0) {
        if (up) {
          b.triangle(inner[k], outer[k], outer[k1], c);
        } else {
          b.triangle(inner[k], outer[k1], outer[k], c);
        }
      } else if (up) {
        b.quad(inner[k], outer[k], outer[k1], inner[k1], c);
      } else {
        b.quad(inner[k], inner[k1], outer[k1], outer[k], c);
      }
    }
  }
}

// Face patterns: a distinct luminance and tint per face, a dark block in one
// corner so no face looks the same after an in-plane half turn, and a coarse
// checker on some faces.
const Color kTints[6] = {{1.0f, 0.55f, 0.5f}, {0.55f, 1.0f, 0.6f}, {0.55f, 0.65f, 1.0f},
                         {1.0f, 0.95f, 0.5f}, {0.85f, 0.6f, 1.0f}, {1.0f, 1.0f, 1.0f}};
const double kLuma[6] = {0.92, 0.62, 0.3, 0.78, 0.42, 0.18};
const bool kChecker[6] = {false, true, false, true, false, true};

Color with_luminance(const Color& tint, double l) {
  const double tl = 0.299 * tint.x() + 0.587 * tint.y() + 0.114 * tint.z();
  return (tint * static_cast<float>(l / tl)).cwiseMin(1.0f).cwiseMax(0.0f);
}

Color face_color(int face, int i, int j) {
  if (i < 3 && j >= kCells - 3) return gray(face == 5 ? 0.97 : 0.04);
  double l = kLuma[face];
  if (kChecker[face] && ((i / 4) + (j / 4)) % 2 == 1) l *= 0.6;
  return with_luminance(kTints[face], l);
}

/// Azimuthal sawtooth with a dark marker stripe at phi = 0.
Color sawtooth_color(int k, int segments, double scale) {
  if (k < segments / 16) return gray(0.05);
  const double l = 0.25 + 0.7 * static_cast<double>(k) / segments;
  return with_luminance(Color(1.0f, 0.8f, 0.6f), l * scale);
}

}  // namespace

TriangleMesh make_box(const Vec3& extents) {
  if ((extents.array() <= 0.0).any()) throw InvalidInput("make_box: extents must be positive");
  const double hx = extents.x() / 2, hy = extents.y() / 2, h = extents.z();
  Builder b;
  add_wall(b, rect_ring(hx, hy, 0.0, kCells), rect_ring(hx, hy, h, kCells), kCells,
           [](int k, int j) { return face_color(k / kCells, k % kCells, j); });
  add_rect_cap(b, hx, hy, 0.0, false, [](int i, int j) { return face_color(4, i, j); });
  add_rect_cap(b, hx, hy, h, true, [](int i, int j) { return face_color(5, i, j); });
  return b.finish();
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
  if (!(radius > 0.0) || !(height > 0.0) || segments < 3) {
    throw InvalidInput("make_cylinder: bad dimensions");
  }
  Builder b;
  add_wall(b, circle_ring(radius, 0.0, segments), circle_ring(radius, height, segments), 4,
           [segments](int k, int) { return sawtooth_color(k, segments, 1.0); });
  add_disc_cap(b, radius, 0.0, segments, false, [](int, int) { return gray(0.4); });
  add_disc_cap(b, radius, height, segments, true, [segments](int k, int i) {
    return k < segments / 16 ? gray(0.1) : (i == 2 ? gray(0.6) : gray(0.92));
  });
  return b.finish();
}

TriangleMesh make_open_box(const Vec3& extents, double wall) {
  if ((extents.array() <= 0.0).any() || !(wall > 0.0) || 2 * wall >= extents.head<2>().minCoeff() ||
      wall >= extents.z()) {
    throw InvalidInput("make_open_box: bad dimensions");
  }
  const double hx = extents.x() / 2, hy = extents.y() / 2, h = extents.z();
  Builder b;
  const Ring outer_bottom = rect_ring(hx, hy, 0.0, kCells);
  const Ring outer_top = rect_ring(hx, hy, h, kCells);
  const Ring inner_top = rect_ring(hx - wall, hy - wall, h, kCells);
  const Ring inner_floor = rect_ring(hx - wall, hy - wall, wall, kCells);
  add_wall(b, outer_bottom, outer_top, kCells,
           [](int k, int j) { return face_color(k / kCells, k % kCells, j); });
  add_wall(b, outer_top, inner_top, 1, [](int, int) { return gray(0.97); });
  add_wall(b, inner_top, inner_floor, kCells / 2,
           [](int k, int) { return gray(0.3 + 0.1 * (k / kCells)); });
  add_rect_cap(b, hx, hy, 0.0, false, [](int i, int j) { return face_color(4, i, j); });
  add_rect_cap(b, hx - wall, hy - wall, wall, true, [](int i, int j) {
    return ((i / 2) + (j / 2)) % 2 == 0 ? gray(0.2) : gray(0.5);
  });
  return b.finish();
}

TriangleMesh make_cup(double radius, double height, double wall, int segments) {
  if (!(radius > 0.0) || !(height > 0.0) || !(wall > 0.0) || wall >= radius || wall >= height ||
      segments < 3) {
    throw InvalidInput("make_cup: bad dimensions");
  }
  Builder b;
  const double inner = radius - wall;
  add_wall(b, circle_ring(radius, 0.0, segments), circle_ring(radius, height, segments), 4,
           [segments](int k, int) { return sawtooth_color(k, segments, 1.0); });
  add_wall(b, circle_ring(radius, height, segments), circle_ring(inner, height, segments), 1,
           [](int, int) { return gray(0.97); });
  add_wall(b, circle_ring(inner, height, segments), circle_ring(inner, wall, segments), 3,
           [segments](int k, int) { return sawtooth_color(k, segments, 0.5); });
  add_disc_cap(b, radius, 0.0, segments, false, [](int, int) { return gray(0.45); });
  add_disc_cap(b, inner, wall, segments, true, [](int, int) { return gray(0.2); });
  return b.finish();
}

TriangleMesh make_ramp(const Vec3& extents) {
  if ((extents.array() <= 0.0).any()) throw InvalidInput("make_ramp: extents must be positive");
  const double hx = extents.x() / 2, hy = extents.y() / 2, h = extents.z();
  const Vec3 a(-hx, -hy, 0), bb(hx, -hy, 0), c(hx, hy, 0), d(-hx, hy, 0);
  const Vec3 e(hx, -hy, h), f(hx, hy, h);
  Builder b;
  b.quad(a, d, c, bb, face_color(4, 0, 0));  // bottom
  b.quad(bb, c, f, e, face_color(0, 0, 0));  // back wall at +x
  b.quad(a, e, f, d, face_color(5, 0, 0));   // slope
  b.triangle(a, bb, e, face_color(1, 0, 0));
  b.triangle(d, f, c, face_color(2, 0, 0));
  return b.finish();
}

TriangleMesh make_primitive(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  std::vector<double> v;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        v.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw InvalidInput("bad primitive parameter '" + item + "' in " + spec);
      }
    }
  }
  auto need = [&](std::size_t n) {
    if (v.size() != n) {
      throw InvalidInput("primitive " + kind + " takes " + std::to_string(n) + " parameters: " + spec);
    }
  };
  if (kind == "box") {
    need(3);
    return make_box({v[0], v[1], v[2]});
  }
  if (kind == "cylinder") {
    need(2);
    return make_cylinder(v[0], v[1]);
  }
  if (kind == "open_box") {
    need(4);
    return make_open_box({v[0], v[1], v[2]}, v[3]);
  }
  if (kind == "cup") {
    need(3);
    return make_cup(v[0], v[1], v[2]);
  }
  if (kind == "ramp") {
    need(3);
    return make_ramp({v[0], v[1], v[2]});
  }
  throw InvalidInput("unknown primitive: " + spec);
}

double primitive_height(const TriangleMesh& mesh) { return compute_aabb(mesh).extent().z(); }

}  // namespace twinforge
