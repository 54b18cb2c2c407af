#include "twinforge/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace twinforge::io {

namespace {

constexpr char kDepthMagic[8] = {'T', 'F', 'D', 'E', 'P', 'T', 'H', '1'};

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Reads the next header token of a PNM file, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const fs::path& path) {
  PnmHeader h;
  h.magic = pnm_token(in);
  try {
    h.width = std::stoi(pnm_token(in));
    h.height = std::stoi(pnm_token(in));
    h.maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PNM header in " + path.string());
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    throw IoError("unsupported PNM header in " + path.string());
  }
  return h;
}

// Raw sample values of a binary PGM (P5), one per pixel.
std::vector<int> read_pgm_samples(const fs::path& path, int& width, int& height, int& maxval) {
  auto in = open_in(path);
  const PnmHeader h = read_pnm_header(in, path);
  if (h.magic != "P5") throw IoError(path.string() + ": expected binary PGM (P5)");
  width = h.width;
  height = h.height;
  maxval = h.maxval;
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  const int bytes = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError(path.string() + ": truncated pixel data");
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
  }
  return out;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

unsigned char to_byte(float c) {
  return static_cast<unsigned char>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f));
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

DepthImage read_depth(const fs::path& path, double depth_scale) {
  {
    auto in = open_in(path);
    char magic[8] = {};
    in.read(magic, 8);
    if (in && std::memcmp(magic, kDepthMagic, 8) == 0) {
      const auto w = static_cast<int>(read_u32(in));
      const auto h = static_cast<int>(read_u32(in));
      if (w <= 0 || h <= 0) throw IoError(path.string() + ": bad raw depth size");
      DepthImage depth(w, h);
      std::vector<float> raw(depth.size());
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
      if (!in) throw IoError(path.string() + ": truncated raw depth");
      for (std::size_t i = 0; i < raw.size(); ++i) {
        depth.values[i] = valid_depth(raw[i]) ? static_cast<double>(raw[i]) : 0.0;
      }
      return depth;
    }
  }
  int w = 0, h = 0, maxval = 0;
  const auto samples = read_pgm_samples(path, w, h, maxval);
  DepthImage depth(w, h);
  for (std::size_t i = 0; i < samples.size(); ++i) depth.values[i] = samples[i] * depth_scale;
  return depth;
}

void write_depth_pgm(const fs::path& path, const DepthImage& depth, double depth_scale) {
  auto out = open_out(path);
  out << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
  for (double z : depth.values) {
    const long q = valid_depth(z) ? std::clamp(std::lround(z / depth_scale), 0L, 65535L) : 0L;
    const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                static_cast<unsigned char>(q & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
}

void write_depth_raw(const fs::path& path, const DepthImage& depth) {
  auto out = open_out(path);
  out.write(kDepthMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(depth.width));
  write_u32(out, static_cast<std::uint32_t>(depth.height));
  std::vector<float> raw(depth.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = valid_depth(depth.values[i]) ? static_cast<float>(depth.values[i]) : 0.0f;
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
}

ColorImage read_ppm(const fs::path& path) {
  auto in = open_in(path);
  const PnmHeader h = read_pnm_header(in, path);
  if (h.magic != "P6") throw IoError(path.string() + ": expected binary PPM (P6)");
  const int bytes = h.maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError(path.string() + ": truncated pixel data");
  ColorImage img(h.width, h.height);
  const float scale = 1.0f / static_cast<float>(h.maxval);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const std::size_t k = 3 * i + c;
      const int s = bytes == 2 ? (raw[2 * k] << 8) | raw[2 * k + 1] : raw[k];
      img.values[i][c] = static_cast<float>(s) * scale;
    }
  }
  return img;
}

void write_ppm(const fs::path& path, const ColorImage& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    for (int c = 0; c < 3; ++c) raw[3 * i + c] = to_byte(image.values[i][c]);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

BinaryMask read_mask(const fs::path& path) {
  int w = 0, h = 0, maxval = 0;
  const auto samples = read_pgm_samples(path, w, h, maxval);
  BinaryMask mask(w, h);
  for (std::size_t i = 0; i < samples.size(); ++i) mask.values[i] = samples[i] != 0 ? 1 : 0;
  return mask;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<unsigned char> raw(mask.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.values[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

TriangleMesh read_obj(const fs::path& path) {
  auto in = open_in(path);
  TriangleMesh mesh;
  std::vector<Color> colors;
  bool all_colored = true;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad vertex");
      }
      mesh.vertices.emplace_back(x, y, z);
      float r, g, b;
      if (ls >> r >> g >> b) {
        colors.emplace_back(r, g, b);
      } else {
        all_colored = false;
        colors.emplace_back(0.7f, 0.7f, 0.7f);
      }
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(i > 0 ? i - 1 : static_cast<int>(mesh.vertices.size()) + i);
      }
      if (idx.size() < 3) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": face with < 3 vertices");
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        mesh.triangles.emplace_back(idx[0], idx[k], idx[k + 1]);
      }
    }
  }
  if (all_colored && !mesh.vertices.empty()) mesh.vertex_colors = std::move(colors);
  mesh.validate();
  return mesh;
}

void write_obj(const fs::path& path, const TriangleMesh& mesh) {
  auto out = open_out(path);
  out.precision(9);
  out << "# twinforge mesh\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << "v " << v.x() << " " << v.y() << " " << v.z();
    if (!mesh.vertex_colors.empty()) {
      const auto& c = mesh.vertex_colors[i];
      out << " " << c.x() << " " << c.y() << " " << c.z();
    }
    out << "\n";
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
}

TriangleMesh read_ply(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": not a PLY file");
  std::size_t n_vertices = 0, n_faces = 0;
  std::vector<std::string> vertex_props;
  std::string current;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw IoError(path.string() + ": only ASCII PLY is supported");
    } else if (tag == "element") {
      std::size_t count = 0;
      ls >> current >> count;
      if (current == "vertex") n_vertices = count;
      if (current == "face") n_faces = count;
    } else if (tag == "property" && current == "vertex") {
      std::string type, name;
      ls >> type >> name;
      vertex_props.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  auto find_prop = [&](const std::string& name) {
    const auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    return it == vertex_props.end() ? -1 : static_cast<int>(it - vertex_props.begin());
  };
  const int ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");
  const int ir = find_prop("red"), ig = find_prop("green"), ib = find_prop("blue");
  if (ix < 0 || iy < 0 || iz < 0) throw IoError(path.string() + ": missing x/y/z");
  const bool colored = ir >= 0 && ig >= 0 && ib >= 0;

  TriangleMesh mesh;
  mesh.vertices.reserve(n_vertices);
  std::vector<double> values(vertex_props.size());
  for (std::size_t i = 0; i < n_vertices; ++i) {
    for (auto& v : values) {
      if (!(in >> v)) throw IoError(path.string() + ": truncated vertex data");
    }
    mesh.vertices.emplace_back(values[ix], values[iy], values[iz]);
    if (colored) {
      mesh.vertex_colors.emplace_back(static_cast<float>(values[ir] / 255.0),
                                      static_cast<float>(values[ig] / 255.0),
                                      static_cast<float>(values[ib] / 255.0));
    }
  }
  for (std::size_t i = 0; i < n_faces; ++i) {
    std::size_t count = 0;
    if (!(in >> count)) throw IoError(path.string() + ": truncated face data");
    std::vector<int> idx(count);
    for (auto& k : idx) in >> k;
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
      mesh.triangles.emplace_back(idx[0], idx[k], idx[k + 1]);
    }
  }
  mesh.validate();
  return mesh;
}

void write_ply(const fs::path& path, const TriangleMesh& mesh) {
  auto out = open_out(path);
  out.precision(9);
  const bool colored = !mesh.vertex_colors.empty();
  out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (colored) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangles.size()
      << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << v.x() << " " << v.y() << " " << v.z();
    if (colored) {
      const auto& c = mesh.vertex_colors[i];
      out << " " << int(to_byte(c.x())) << " " << int(to_byte(c.y())) << " " << int(to_byte(c.z()));
    }
    out << "\n";
  }
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

TriangleMesh read_mesh(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return read_obj(path);
  if (ext == ".ply") return read_ply(path);
  throw IoError("unsupported mesh format: " + path.string());
}

void write_mesh(const fs::path& path, const TriangleMesh& mesh) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return write_obj(path, mesh);
  if (ext == ".ply") return write_ply(path, mesh);
  throw IoError("unsupported mesh format: " + path.string());
}

}  // namespace twinforge::io
