#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/error.hpp"
#include "twinforge/material.hpp"

using namespace twinforge;

TEST_CASE("built-in materials") {
  const MaterialTable t = MaterialTable::builtin();
  CHECK(t.rows().size() == 8);
  const MaterialLookup wood = t.lookup("wood");
  CHECK_FALSE(wood.warning);
  CHECK(wood.props.density == 700.0);
  const MaterialLookup unknown = t.lookup("unobtainium");
  CHECK(unknown.warning);
  CHECK(unknown.props.name == default_material().name);
}

TEST_CASE("material files") {
  const auto dir = testutil::temp_dir("materials");
  std::ofstream(dir / "m.txt") << "version 1\n# name density mu_s mu_d e\nice 917 0.1 0.03 0.1\n";
  const MaterialTable t = MaterialTable::load(dir / "m.txt");
  CHECK(t.lookup("ice").props.static_friction == 0.1);
  std::ofstream(dir / "noversion.txt") << "ice 917 0.1 0.03 0.1\n";
  CHECK_THROWS_AS(MaterialTable::load(dir / "noversion.txt"), InvalidInput);
  std::ofstream(dir / "bad.txt") << "version 1\nice 917 0.1 0.3 0.1\n";
  CHECK_THROWS_AS(MaterialTable::load(dir / "bad.txt"), InvalidInput);
  CHECK_NOTHROW(MaterialTable::load(TWINFORGE_DATA_DIR "/materials.txt"));
}
