#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace twinforge {

struct MaterialProps {
  std::string name;
  double density = 500.0;  // kg/m^3
  double static_friction = 0.5;
  double dynamic_friction = 0.4;
  double restitution = 0.1;

  /// density > 0, 0 <= dynamic <= static friction, restitution in [0, 1].
  void validate() const;
};

/// Row used for names missing from the table.
MaterialProps default_material();

struct MaterialLookup {
  MaterialProps props;
  /// Set when the name was unknown and the default row was returned.
  bool warning = false;
};

class MaterialTable {
 public:
  /// wood, plastic, ceramic, metal, glass, cardboard, rubber, foam.
  static MaterialTable builtin();
  /// Text table: `version 1`, then `name density mu_s mu_d e` rows; '#'
  /// comments. Rows replace built-in entries of the same name when merged.
  static MaterialTable load(const std::filesystem::path& path);

  void set(const MaterialProps& props);
  MaterialLookup lookup(const std::string& name) const;
  const std::map<std::string, MaterialProps>& rows() const { return rows_; }

 private:
  std::map<std::string, MaterialProps> rows_;
};

}  // namespace twinforge
