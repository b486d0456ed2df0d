#include "doctest.h"

#include "psbfem/free_surface.hpp"
#include "psbfem/mesh_gen.hpp"

#include <cmath>

using namespace psbfem;

namespace {

// Thin rectangular dam slab: heads on the x = 0 / x = w faces.
Mesh rect_dam(int nx, int nz, double w = 0.5, double h = 1.0) {
  Mesh m = make_box_grid({Vec3(0, 0, 0), Vec3(w, w / nx, h)}, {nx, 1, nz});
  return m;
}

FreeSurfaceProblem rect_problem(double up = 1.0, double down = 0.5) {
  FreeSurfaceProblem p;
  p.upstream_set = "xmin";
  p.downstream_set = "xmax";
  p.upstream_head = up;
  p.downstream_head = down;
  return p;
}

} // namespace

TEST_CASE("columns of a box grid stack every vertical node line") {
  Mesh m = make_box_grid({Vec3(0, 0, 0), Vec3(2, 1, 3)}, {4, 2, 6});
  auto cols = build_columns(m);
  CHECK(cols.size() == 5 * 3);
  for (const auto& c : cols) {
    CHECK(c.nodes.size() == 7);
    for (size_t i = 1; i < c.nodes.size(); ++i)
      CHECK(m.nodes[c.nodes[i]].z() > m.nodes[c.nodes[i - 1]].z());
  }
}

TEST_CASE("chained columns follow the sheared lattice of the trapezoid dam") {
  Mesh m = make_trapezoid_dam(6.0, 2.0, 1.0, 1.0, 0.5, {16, 1, 60});
  auto cols = build_columns(m);
  CHECK_FALSE(cols.empty());
  size_t covered = 0;
  for (const auto& c : cols) {
    covered += c.nodes.size();
    for (size_t i = 1; i < c.nodes.size(); ++i) {
      const Vec3 lo = m.nodes[c.nodes[i - 1]], hi = m.nodes[c.nodes[i]];
      CHECK(hi.z() > lo.z());
      // Chain links never jump further sideways than the local slope allows.
      CHECK((hi - lo).head<2>().norm() < 1.5 * (hi.z() - lo.z()) + 1e-9);
    }
  }
  CHECK(covered > 9 * m.nodes.size() / 10);
}

TEST_CASE("classification: surface above, below, and between layers") {
  Mesh m = make_box_grid({Vec3(0, 0, 0), Vec3(1, 1, 2)}, {1, 1, 2});
  FreeSurfaceState st;
  st.columns = build_columns(m);
  st.phi = Eigen::VectorXd::Constant(int(st.columns.size()), 5.0);
  auto sat = classify_elements(m, st);
  CHECK(sat[0] == doctest::Approx(1.0));
  CHECK(sat[1] == doctest::Approx(1.0));

  st.phi.setConstant(-1.0);
  sat = classify_elements(m, st);
  CHECK(sat[0] == doctest::Approx(0.0));
  CHECK(sat[1] == doctest::Approx(0.0));

  st.phi.setConstant(1.0);
  sat = classify_elements(m, st);
  CHECK(sat[0] == doctest::Approx(1.0));
  CHECK(sat[1] == doctest::Approx(0.0));
}

TEST_CASE("effective material blends between dry_factor*k and k") {
  const Material base = Material::isotropic(2.0, 1.0);
  CHECK(effective_material(base, 1.0, 1e-3).k(0, 0) == doctest::Approx(2.0));
  CHECK(effective_material(base, 0.0, 1e-3).k(0, 0) == doctest::Approx(2e-3));
  CHECK(effective_material(base, 0.5, 1e-3).k(0, 0) ==
        doctest::Approx(2.0 * (1e-3 + 0.999 * 0.5)));
  CHECK(effective_material(base, 0.5, 1e-3).Ss == doctest::Approx(1.0));
}

TEST_CASE("first overflow update holds every downstream node above the tailwater") {
  Mesh m = rect_dam(10, 20);
  OverflowUpdate up = update_overflow_boundary(m, rect_problem(), {});
  for (int n : m.node_set("xmax")) {
    const double z = m.nodes[n].z();
    REQUIRE(up.dirichlet.count(n) == 1);
    if (z > 0.5 + 1e-9)
      CHECK(up.dirichlet.at(n) == doctest::Approx(z));
    else
      CHECK(up.dirichlet.at(n) == doctest::Approx(0.5));
  }
  for (int n : up.overflow_nodes) CHECK(m.nodes[n].z() > 0.5);
  // Every node in (0.5, 1.0] joins the initial seepage face.
  size_t above = 0;
  for (int n : m.node_set("xmax"))
    if (m.nodes[n].z() > 0.5 + 1e-9) ++above;
  CHECK(up.overflow_nodes.size() == above);

  // Excluded nodes are released from the face.
  std::set<int> excluded{up.overflow_nodes.front()};
  OverflowUpdate up2 = update_overflow_boundary(m, rect_problem(), excluded);
  CHECK(up2.overflow_nodes.size() == above - 1);
  CHECK(up2.dirichlet.count(*excluded.begin()) == 0);
}

TEST_CASE("equal heads converge immediately to a flat surface") {
  Mesh m = rect_dam(6, 12);
  FreeSurfaceResult r = iterate_free_surface(m, Material::isotropic(1.0), rect_problem(0.8, 0.8));
  CHECK(r.state.converged);
  CHECK(r.state.iteration == 1);
  CHECK(r.state.overflow_nodes.empty());
  for (int c = 0; c < r.state.phi.size(); ++c)
    CHECK(r.state.phi[c] == doctest::Approx(0.8).epsilon(1e-9));
  for (size_t n = 0; n < m.nodes.size(); ++n)
    CHECK(std::abs(r.field.heads[int(n)] - 0.8) < 1e-6);
}

TEST_CASE("coarse rectangular dam: convergence, bounds, zero pressure on the surface") {
  Mesh m = rect_dam(16, 32);
  FreeSurfaceConfig cfg;
  cfg.epsilon = 5e-4;
  cfg.max_iters = 200;
  cfg.relaxation = 0.3;
  FreeSurfaceResult r = iterate_free_surface(m, Material::isotropic(1.0), rect_problem(), cfg);

  CHECK(r.state.converged);
  CHECK(r.state.last_change < cfg.epsilon);
  CHECK(r.state.exit_elevation > 0.5);
  CHECK(r.state.exit_elevation < 1.0);

  // phi stays inside [downstream, upstream] and decreases towards the outlet.
  const auto& cols = r.state.columns;
  std::vector<std::pair<double, double>> xp;
  for (size_t c = 0; c < cols.size(); ++c) {
    CHECK(r.state.phi[int(c)] >= 0.5 - 1e-9);
    CHECK(r.state.phi[int(c)] <= 1.0 + 1e-9);
    xp.emplace_back(cols[c].xy.x(), r.state.phi[int(c)]);
  }
  std::sort(xp.begin(), xp.end());
  for (size_t i = 1; i < xp.size(); ++i) CHECK(xp[i].second <= xp[i - 1].second + 1e-6);

  // Pressure head vanishes on the recovered surface away from the end faces.
  for (size_t c = 0; c < cols.size(); ++c) {
    const double x = cols[c].xy.x();
    if (x < 0.05 || x > 0.45) continue;
    const double phi = r.state.phi[int(c)];
    double below = -1e300, h_below = 0, above = 1e300, h_above = 0;
    for (int n : cols[c].nodes) {
      const double z = m.nodes[n].z();
      if (z <= phi && z > below) below = z, h_below = r.field.heads[n];
      if (z >= phi && z < above) above = z, h_above = r.field.heads[n];
    }
    const double t = above > below ? (phi - below) / (above - below) : 0.0;
    const double head = h_below + t * (h_above - h_below);
    CHECK(std::abs(head - phi) < 5e-3);  // pressure head ~ 0 within a few epsilon
  }
}

TEST_CASE("non-convergence reports the oscillation history") {
  Mesh m = rect_dam(8, 16);
  FreeSurfaceConfig cfg;
  cfg.epsilon = 1e-12;  // unreachable
  cfg.max_iters = 3;
  CHECK_THROWS_AS(
      iterate_free_surface(m, Material::isotropic(1.0), rect_problem(), cfg), NumericalError);
}
