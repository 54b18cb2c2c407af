#pragma once

#include <filesystem>
#include <string>

#include "twinforge/geometry.hpp"

namespace twinforge::io {

namespace fs = std::filesystem;

// Images. Depth is read from either a 16-bit PGM (value * depth_scale meters;
// 0 = invalid) or the raw float format: 8-byte magic "TFDEPTH1", uint32
// width, uint32 height (little endian), then width*height float32 meters.
DepthImage read_depth(const fs::path& path, double depth_scale = 0.001);
void write_depth_pgm(const fs::path& path, const DepthImage& depth, double depth_scale = 0.001);
void write_depth_raw(const fs::path& path, const DepthImage& depth);

ColorImage read_ppm(const fs::path& path);
void write_ppm(const fs::path& path, const ColorImage& image);

BinaryMask read_mask(const fs::path& path);
void write_mask(const fs::path& path, const BinaryMask& mask);

// Meshes. OBJ: `v x y z [r g b]` and `f a b c ...` (1-based, polygons fanned,
// `a/b/c` forms accepted, vt/vn ignored). PLY: ASCII with float x y z and
// optional uchar red/green/blue vertex properties, `vertex_indices` faces.
TriangleMesh read_obj(const fs::path& path);
void write_obj(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const fs::path& path);
void write_ply(const fs::path& path, const TriangleMesh& mesh);
/// Dispatches on the extension (.obj / .ply).
TriangleMesh read_mesh(const fs::path& path);
void write_mesh(const fs::path& path, const TriangleMesh& mesh);

}  // namespace twinforge::io
