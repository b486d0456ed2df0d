#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psbfem/mesh.hpp"
#include "psbfem/mesh_gen.hpp"

#include <cstdio>
#include <fstream>

using namespace psbfem;

namespace {

Mesh unit_cube() { return make_box_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1}); }

} // namespace

TEST_CASE("unit cube mesh is valid and minimal") {
  Mesh m = unit_cube();
  CHECK(m.nodes.size() == 8);
  CHECK(m.faces.size() == 6);
  CHECK(m.elements.size() == 1);
  CHECK(validate_mesh(m).ok());
}

TEST_CASE("json round trip is the identity") {
  Mesh m = unit_cube();
  const std::string path = "roundtrip_cube.json";
  save_mesh_json(m, path);
  Mesh r = load_mesh(path);
  std::remove(path.c_str());

  REQUIRE(r.nodes.size() == m.nodes.size());
  for (size_t n = 0; n < m.nodes.size(); ++n) CHECK((r.nodes[n] - m.nodes[n]).norm() == 0.0);
  REQUIRE(r.faces.size() == m.faces.size());
  for (size_t f = 0; f < m.faces.size(); ++f) CHECK(r.faces[f].nodes == m.faces[f].nodes);
  REQUIRE(r.elements.size() == m.elements.size());
  for (size_t e = 0; e < m.elements.size(); ++e) {
    REQUIRE(r.elements[e].faces.size() == m.elements[e].faces.size());
    for (size_t k = 0; k < m.elements[e].faces.size(); ++k) {
      CHECK(r.elements[e].faces[k].face == m.elements[e].faces[k].face);
      CHECK(r.elements[e].faces[k].sign == m.elements[e].faces[k].sign);
    }
  }
  CHECK(r.node_sets == m.node_sets);
}

TEST_CASE("winding defects are rejected") {
  // All loops reversed: consistent manifold, negative volume.
  Mesh m = unit_cube();
  for (auto& f : m.faces) std::reverse(f.nodes.begin(), f.nodes.end());
  ValidationReport rep = validate_mesh(m);
  REQUIRE_FALSE(rep.ok());
  bool degenerate = false;
  for (const auto& d : rep.entries) degenerate = degenerate || d.kind == "degenerate";
  CHECK(degenerate);

  // A single reversed loop breaks the opposite-traversal rule.
  Mesh m2 = unit_cube();
  std::reverse(m2.faces[0].nodes.begin(), m2.faces[0].nodes.end());
  ValidationReport rep2 = validate_mesh(m2);
  REQUIRE_FALSE(rep2.ok());
  bool closed = false;
  for (const auto& d : rep2.entries) closed = closed || d.kind == "closedness";
  CHECK(closed);
}

TEST_CASE("concave caps are rejected before any element-level check") {
  // L-shaped prism: the hexagonal caps have a reflex corner. Face geometry is
  // validated first and gates the element checks, so the report carries
  // convexity entries only.
  Mesh m;
  const std::vector<Vec2> base = {{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 3}, {0, 3}};
  for (double z : {0.0, 1.0})
    for (const Vec2& p : base) m.nodes.push_back({p.x(), p.y(), z});
  m.faces.push_back({{0, 5, 4, 3, 2, 1}});     // bottom, outward -z
  m.faces.push_back({{6, 7, 8, 9, 10, 11}});   // top, outward +z
  for (int i = 0; i < 6; ++i) {
    const int j = (i + 1) % 6;
    m.faces.push_back({{i, j, j + 6, i + 6}});
  }
  m.elements.push_back(
      {{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}, {7, 1}}});

  ValidationReport rep = validate_mesh(m);
  REQUIRE_FALSE(rep.ok());
  for (const auto& d : rep.entries) CHECK(d.kind == "convexity");
  CHECK(rep.entries.size() == 2);  // both caps, one reflex corner each
}

TEST_CASE("non-star-convex element with convex faces is flagged by orientation") {
  // Dented octahedron: the apex pushed below the equator turns the four upper
  // triangles inward. All faces stay planar and convex, so the element-level
  // check runs and reports non-outward normals w.r.t. the scaling centre.
  // (The separate star-convexity entry is a tolerance guard: for an exactly
  // planar convex face every fan sector equals the centre-to-plane distance
  // times the in-plane fan orientation, so it cannot fire once the
  // orientation test passes.)
  Mesh m;
  m.nodes = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, -0.5}, {0, 0, -1}};
  m.faces = {{{0, 2, 4}}, {{2, 1, 4}}, {{1, 3, 4}}, {{3, 0, 4}},
             {{2, 0, 5}}, {{1, 2, 5}}, {{3, 1, 5}}, {{0, 3, 5}}};
  m.elements = {{{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}, {7, 1}}}};

  ValidationReport rep = validate_mesh(m);
  REQUIRE_FALSE(rep.ok());
  size_t orientation = 0;
  for (const auto& d : rep.entries) orientation += d.kind == "orientation";
  CHECK(orientation == 4);  // the four upper faces
}

TEST_CASE("non-planar face is flagged") {
  Mesh m = unit_cube();
  // Warp one corner well beyond the planarity tolerance.
  m.nodes[0] += Vec3(0, 0, 0.1);
  ValidationReport rep = validate_mesh(m);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& d : rep.entries) found = found || d.kind == "planarity";
  CHECK(found);
}

TEST_CASE("scaling centre is the volume centroid") {
  Mesh m = unit_cube();
  CHECK((m.scaling_centre(0) - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);

  for (auto& n : m.nodes) n += Vec3(2, 0, 0);
  CHECK((m.scaling_centre(0) - Vec3(2.5, 0.5, 0.5)).norm() < 1e-12);

  // Right tetrahedron: centroid at the vertex average.
  Mesh t;
  t.nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  t.faces = {{{0, 2, 1}}, {{0, 1, 3}}, {{0, 3, 2}}, {{1, 2, 3}}};
  t.elements = {{{{0, 1}, {1, 1}, {2, 1}, {3, 1}}}};
  REQUIRE(validate_mesh(t).ok());
  CHECK((t.scaling_centre(0) - Vec3(0.25, 0.25, 0.25)).norm() < 1e-12);
  CHECK(t.element_volume(0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("face-pyramid volumes are positive and sum to the element volume") {
  Mesh m = make_box_grid({Vec3(0, 0, 0), Vec3(2, 1, 1)}, {2, 1, 1});
  for (size_t e = 0; e < m.elements.size(); ++e) {
    const Vec3 c = m.scaling_centre(int(e));
    double sum = 0.0;
    for (const auto& fr : m.elements[e].faces) {
      const Vec3 n = double(fr.sign) * m.face_normal(fr.face);
      const double h = n.dot(m.face_centroid(fr.face) - c);
      CHECK(h > 0.0);
      sum += m.face_area(fr.face) * h / 3.0;
    }
    CHECK(sum == doctest::Approx(m.element_volume(int(e))).epsilon(1e-10));
  }
}

TEST_CASE("octree refinement: identity, full split, transition cells") {
  const Box dom{Vec3(0, 0, 0), Vec3(1, 1, 1)};

  Mesh base = octree_refine_box(dom, {1, 1, 1}, dom, 0);
  CHECK(base.elements.size() == 1);

  Mesh split = octree_refine_box(dom, {1, 1, 1}, dom, 1);
  CHECK(split.elements.size() == 8);
  CHECK(validate_mesh(split).ok());

  const Box dom2{Vec3(0, 0, 0), Vec3(2, 1, 1)};
  Mesh mixed = octree_refine_box(dom2, {2, 1, 1}, {Vec3(0, 0, 0), Vec3(1, 1, 1)}, 1);
  CHECK(mixed.elements.size() == 9);
  CHECK(validate_mesh(mixed).ok());
  size_t max_faces = 0;
  for (const auto& e : mixed.elements) max_faces = std::max(max_faces, e.faces.size());
  CHECK(max_faces > 6);  // the coarse cell carries the 4 sub-faces of the interface
}

TEST_CASE("octree refinement preserves the domain volume") {
  const Box dom{Vec3(0, 0, 0), Vec3(3, 2, 1)};
  Mesh m = octree_refine_box(dom, {3, 2, 1}, {Vec3(1, 0, 0), Vec3(2, 1, 1)}, 2);
  double vol = 0.0;
  for (size_t e = 0; e < m.elements.size(); ++e) vol += m.element_volume(int(e));
  CHECK(vol == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("patch mesh: four hexahedra over one general polyhedron") {
  Mesh m = make_patch_mesh();
  CHECK(m.elements.size() == 5);
  CHECK(validate_mesh(m).ok());
  size_t max_faces = 0;
  for (const auto& e : m.elements) max_faces = std::max(max_faces, e.faces.size());
  CHECK(max_faces == 9);
}

TEST_CASE("trapezoid dam mesh is valid with the expected node sets") {
  Mesh m = make_trapezoid_dam(6.0, 2.0, 1.0, 1.0, 0.5, {8, 1, 12});
  CHECK(validate_mesh(m).ok());
  CHECK_FALSE(m.node_set("upstream").empty());
  CHECK_FALSE(m.node_set("downstream").empty());
  CHECK_FALSE(m.node_set("zmin").empty());
}

TEST_CASE("missing file and bad references raise typed errors") {
  CHECK_THROWS_AS(load_mesh("no_such_mesh.json"), Error);
  Mesh m = unit_cube();
  m.faces[0].nodes[0] = 99;
  CHECK_FALSE(validate_mesh(m).ok());
}
