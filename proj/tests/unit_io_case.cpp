#include "doctest.h"

#include "psbfem/case.hpp"
#include "psbfem/io.hpp"
#include "psbfem/mesh_gen.hpp"

#include <cstdio>
#include <fstream>

using namespace psbfem;

namespace {

std::string cases_dir() { return PSBFEM_CASES_DIR; }

} // namespace

TEST_CASE("vtk round trip recovers geometry and fields") {
  Mesh m = make_box_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
  ExportFields fields;
  fields.point_data["head"] = Eigen::VectorXd::Constant(8, 1.0);
  const std::string path = "roundtrip_cube.vtk";
  export_vtk(m, fields, path);

  VtkGrid g = read_vtk(path);
  std::remove(path.c_str());
  REQUIRE(g.points.size() == 8);
  for (size_t n = 0; n < 8; ++n) CHECK((g.points[n] - m.nodes[n]).norm() < 1e-12);
  REQUIRE(g.cells.size() == 1);
  CHECK(g.cell_types[0] == 12);  // plain hexahedron
  for (double v : g.point_data.at("head")) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("octree meshes export transition cells as polyhedra") {
  Mesh m = octree_refine_box({Vec3(0, 0, 0), Vec3(2, 1, 1)}, {2, 1, 1},
                             {Vec3(0, 0, 0), Vec3(1, 1, 1)}, 1);
  const std::string path = "roundtrip_octree.vtk";
  export_vtk(m, {}, path);
  VtkGrid g = read_vtk(path);
  std::remove(path.c_str());
  REQUIRE(g.cells.size() == m.elements.size());
  bool has_poly = false, has_hex = false;
  for (int t : g.cell_types) {
    has_poly = has_poly || t == 42;
    has_hex = has_hex || t == 12;
  }
  CHECK(has_poly);
  CHECK(has_hex);
}

TEST_CASE("monitor csv uses 12 significant digits") {
  CHECK(format_sig12(1.0 / 3.0) == "0.333333333333");
  const std::string path = "monitors_test.csv";
  write_monitor_csv(path, {0.0, 1.0}, {"a"}, {{2.0, 4.0}});
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  in.close();
  std::remove(path.c_str());
  CHECK(header == "time,a");
  CHECK(row.substr(0, 2) == "0,");
}

TEST_CASE("malformed case files raise parse errors with context") {
  const std::string path = "broken_case.json";
  std::ofstream(path) << "{\"name\": \"x\", \"mesh\": {}}";
  CHECK_THROWS_AS(load_case(path), ParseError);
  std::ofstream(path) << "not json";
  CHECK_THROWS_AS(load_case(path), ParseError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_case("missing_case.json"), ParseError);
}

TEST_CASE("patch case file runs and self-reports the linear-field error") {
  AnalysisCase cs = load_case(cases_dir() + "/patch.json");
  CHECK(cs.kind == AnalysisKind::kSteady);
  Mesh mesh = build_case_mesh(cs);
  CHECK(mesh.elements.size() == 5);

  CaseSummary sum = run_case(cs, 1);
  REQUIRE(sum.max_linear_rel_error.has_value());
  CHECK(*sum.max_linear_rel_error <= 1e-4);
  CHECK(sum.monitor_values.at(0).second == doctest::Approx(50.0).epsilon(1e-4));
}

TEST_CASE("case runs are deterministic") {
  AnalysisCase cs = load_case(cases_dir() + "/patch.json");
  CaseSummary a = run_case(cs, 1);
  CaseSummary b = run_case(cs, 2);
  CHECK(a.monitor_values.at(0).second == b.monitor_values.at(0).second);
  CHECK(*a.max_linear_rel_error == *b.max_linear_rel_error);
}

TEST_CASE("committed case files all load") {
  for (const char* name : {"patch.json", "dam_steady.json", "dam_octree.json",
                           "rect_dam.json", "trapezoid_dam.json", "column_transient.json",
                           "dam_transient.json"}) {
    AnalysisCase cs = load_case(cases_dir() + "/" + name);
    CHECK_FALSE(cs.materials.empty());
  }
}
