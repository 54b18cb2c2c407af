#include "twinforge/material.hpp"

#include <fstream>
#include <sstream>

#include "twinforge/error.hpp"

namespace twinforge {

void MaterialProps::validate() const {
  if (!(density > 0.0)) throw InvalidInput("material " + name + ": density must be > 0");
  if (!(dynamic_friction >= 0.0 && dynamic_friction <= static_friction)) {
    throw InvalidInput("material " + name + ": need 0 <= dynamic friction <= static friction");
  }
  if (!(restitution >= 0.0 && restitution <= 1.0)) {
    throw InvalidInput("material " + name + ": restitution must be in [0, 1]");
  }
}

MaterialProps default_material() { return {"default", 500.0, 0.5, 0.4, 0.1}; }

MaterialTable MaterialTable::builtin() {
  MaterialTable t;
  for (const MaterialProps& m : std::initializer_list<MaterialProps>{
           {"wood", 700.0, 0.5, 0.4, 0.3},
           {"plastic", 1100.0, 0.4, 0.3, 0.4},
           {"ceramic", 2400.0, 0.6, 0.5, 0.2},
           {"metal", 7800.0, 0.6, 0.45, 0.25},
           {"glass", 2500.0, 0.9, 0.4, 0.15},
           {"cardboard", 690.0, 0.6, 0.5, 0.1},
           {"rubber", 1200.0, 1.0, 0.8, 0.7},
           {"foam", 30.0, 0.8, 0.6, 0.05}}) {
    t.set(m);
  }
  return t;
}

MaterialTable MaterialTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open material table " + path.string());
  MaterialTable t;
  bool versioned = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!versioned) {
      int version = 0;
      if (first != "version" || !(ss >> version) || version != 1) {
        throw InvalidInput(where + ": expected 'version 1'");
      }
      versioned = true;
      continue;
    }
    MaterialProps m;
    m.name = first;
    if (!(ss >> m.density >> m.static_friction >> m.dynamic_friction >> m.restitution)) {
      throw InvalidInput(where + ": expected name density mu_s mu_d restitution");
    }
    m.validate();
    t.set(m);
  }
  if (!versioned) throw InvalidInput(path.string() + ": missing version line");
  return t;
}

void MaterialTable::set(const MaterialProps& props) {
  props.validate();
  rows_[props.name] = props;
}

MaterialLookup MaterialTable::lookup(const std::string& name) const {
  if (auto it = rows_.find(name); it != rows_.end()) return {it->second, false};
  return {default_material(), true};
}

}  // namespace twinforge
