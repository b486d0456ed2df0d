#include "psbfem/free_surface.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace psbfem {

std::vector<SurfaceColumn> build_columns(const Mesh& mesh) {
  const Box bb = mesh.bounding_box();
  const double span = std::max({bb.extent().x(), bb.extent().y(), 1e-12});
  const double tol = 1e-7 * span;

  // Quantized (x, y) key -> column index.
  auto key = [&](const Vec3& p) {
    return std::make_pair(std::llround(p.x() / tol), std::llround(p.y() / tol));
  };
  std::map<std::pair<long long, long long>, int> index;
  std::vector<SurfaceColumn> cols;
  for (size_t n = 0; n < mesh.nodes.size(); ++n) {
    auto k = key(mesh.nodes[n]);
    auto [it, inserted] = index.emplace(k, int(cols.size()));
    if (inserted) cols.push_back({Vec2(mesh.nodes[n].x(), mesh.nodes[n].y()), {}});
    cols[it->second].nodes.push_back(int(n));
  }

  // Consecutive column nodes must share a mesh edge: sheared meshes produce
  // accidental vertical stacks of mutually distant nodes (equal x on the
  // node lattice), which would report meaningless surface crossings.
  std::set<std::pair<int, int>> edges;
  for (const auto& f : mesh.faces)
    for (size_t i = 0; i < f.nodes.size(); ++i) {
      int a = f.nodes[i], b = f.nodes[(i + 1) % f.nodes.size()];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  auto is_edge = [&](int a, int b) {
    return edges.count({std::min(a, b), std::max(a, b)}) > 0;
  };

  std::vector<SurfaceColumn> out;
  size_t covered = 0;
  for (auto& c : cols) {
    if (c.nodes.size() < 2) continue;
    std::sort(c.nodes.begin(), c.nodes.end(), [&](int a, int b) {
      return mesh.nodes[a].z() < mesh.nodes[b].z();
    });
    size_t run = 0;
    for (size_t i = 1; i <= c.nodes.size(); ++i) {
      if (i < c.nodes.size() && is_edge(c.nodes[i - 1], c.nodes[i])) continue;
      if (i - run >= 2) {
        out.push_back({c.xy, {c.nodes.begin() + run, c.nodes.begin() + i}});
        covered += i - run;
      }
      run = i;
    }
  }
  // Exact grouping only counts when it explains nearly all nodes; otherwise
  // the mesh is sheared and columns must be chained level by level.
  if (covered < 9 * mesh.nodes.size() / 10) out = build_chained_columns(mesh);
  if (out.empty()) throw Error("free surface: no vertical node columns in the mesh");
  return out;
}

std::vector<SurfaceColumn> build_chained_columns(const Mesh& mesh) {
  const Box bb = mesh.bounding_box();
  const double ztol = 1e-7 * std::max(bb.extent().z(), 1e-12);

  // Nodes bucketed into quantized elevation levels, bottom to top.
  std::map<long long, std::vector<int>> levels;
  for (size_t n = 0; n < mesh.nodes.size(); ++n)
    levels[std::llround(mesh.nodes[n].z() / ztol)].push_back(int(n));

  auto xy = [&](int n) { return Vec2(mesh.nodes[n].x(), mesh.nodes[n].y()); };

  std::vector<SurfaceColumn> cols;
  std::vector<Vec2> tops;  // horizontal position of each column's top node
  for (auto& [zq, nodes] : levels) {
    // A node may only continue the column whose top is closer than half the
    // in-level node spacing, which bounds the admissible shear per level.
    double spacing = std::numeric_limits<double>::max();
    for (size_t a = 0; a < nodes.size(); ++a)
      for (size_t b = a + 1; b < nodes.size(); ++b)
        spacing = std::min(spacing, (xy(nodes[a]) - xy(nodes[b])).squaredNorm());
    const double limit = 0.25 * spacing;

    std::vector<std::pair<int, int>> attach;  // node -> column, applied after matching
    for (int n : nodes) {
      int pick = -1;
      double best = limit;
      for (size_t c = 0; c < cols.size(); ++c) {
        double d = (tops[c] - xy(n)).squaredNorm();
        if (d < best) {
          best = d;
          pick = int(c);
        }
      }
      attach.push_back({n, pick});
    }
    for (auto [n, pick] : attach) {
      if (pick < 0) {
        cols.push_back({xy(n), {n}});
        tops.push_back(xy(n));
      } else {
        cols[pick].nodes.push_back(n);
        tops[pick] = xy(n);
      }
    }
  }

  std::vector<SurfaceColumn> out;
  for (auto& c : cols)
    if (c.nodes.size() >= 2) out.push_back(std::move(c));
  return out;
}

Vec2 column_xy_at(const Mesh& mesh, const SurfaceColumn& col, double z) {
  auto xy = [&](int n) { return Vec2(mesh.nodes[n].x(), mesh.nodes[n].y()); };
  const auto& nodes = col.nodes;
  if (z <= mesh.nodes[nodes.front()].z()) return xy(nodes.front());
  for (size_t i = 1; i < nodes.size(); ++i) {
    const double z0 = mesh.nodes[nodes[i - 1]].z();
    const double z1 = mesh.nodes[nodes[i]].z();
    if (z <= z1)
      return z1 > z0 ? Vec2(xy(nodes[i - 1]) + (z - z0) / (z1 - z0) * (xy(nodes[i]) - xy(nodes[i - 1])))
                     : xy(nodes[i]);
  }
  return xy(nodes.back());
}

double phi_at(const Mesh& mesh, const FreeSurfaceState& state, const Vec3& p) {
  // Nearest column by horizontal distance at the query elevation, so slanted
  // (chained) columns are compared where the query actually sits.
  double best = std::numeric_limits<double>::max();
  int pick = 0;
  for (size_t c = 0; c < state.columns.size(); ++c) {
    double d = (column_xy_at(mesh, state.columns[c], p.z()) - Vec2(p.x(), p.y())).squaredNorm();
    if (d < best) {
      best = d;
      pick = int(c);
    }
  }
  return state.phi[pick];
}

std::vector<double> classify_elements(const Mesh& mesh, const FreeSurfaceState& state) {
  std::vector<double> sat(mesh.elements.size(), 1.0);
  for (size_t e = 0; e < mesh.elements.size(); ++e) {
    const Vec3 c = mesh.scaling_centre(int(e));
    double zlo = std::numeric_limits<double>::max(), zhi = std::numeric_limits<double>::lowest();
    for (int n : mesh.element_nodes(int(e))) {
      zlo = std::min(zlo, mesh.nodes[n].z());
      zhi = std::max(zhi, mesh.nodes[n].z());
    }
    const double phi = phi_at(mesh, state, c);
    sat[e] = zhi > zlo ? std::clamp((phi - zlo) / (zhi - zlo), 0.0, 1.0) : (c.z() <= phi);
  }
  return sat;
}

Material effective_material(const Material& base, double saturation, double dry_factor) {
  Material m = base;
  m.k *= dry_factor + (1.0 - dry_factor) * saturation;
  return m;
}

OverflowUpdate update_overflow_boundary(const Mesh& mesh, const FreeSurfaceProblem& problem,
                                        const std::set<int>& excluded) {
  OverflowUpdate upd;
  const auto& down = mesh.node_set(problem.downstream_set);
  if (down.empty()) throw Error("free surface: empty downstream node set");

  const Box bb = mesh.bounding_box();
  const double tol = 1e-9 * std::max(1.0, bb.extent().z());
  for (int n : down) {
    const double z = mesh.nodes[n].z();
    if (z <= problem.downstream_head + tol) {
      upd.dirichlet[n] = problem.downstream_head;
    } else if (z > problem.upstream_head + tol) {
      // Heads never exceed the upstream level (maximum principle), so nodes
      // above it cannot sit on the seepage face; they stay natural.
    } else if (!excluded.count(n)) {
      upd.dirichlet[n] = z;
      upd.overflow_nodes.push_back(n);
    }
  }
  return upd;
}

Eigen::VectorXd recover_phi(const Mesh& mesh, const std::vector<SurfaceColumn>& columns,
                            const Eigen::VectorXd& heads) {
  Eigen::VectorXd phi(int(columns.size()));
  for (size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c].nodes;
    auto pressure = [&](int i) { return heads[col[i]] - mesh.nodes[col[i]].z(); };

    const double z_bottom = mesh.nodes[col.front()].z();
    const double z_top = mesh.nodes[col.back()].z();
    if (pressure(0) < 0.0) {
      phi[c] = z_bottom;
      continue;
    }
    double value = z_top;  // fully wet column: surface at (or above) its top
    for (size_t i = 1; i < col.size(); ++i) {
      const double p0 = pressure(int(i - 1));
      const double p1 = pressure(int(i));
      if (p1 < 0.0) {
        const double z0 = mesh.nodes[col[i - 1]].z();
        const double z1 = mesh.nodes[col[i]].z();
        value = p0 - p1 > 0 ? z0 + p0 * (z1 - z0) / (p0 - p1) : z0;
        break;
      }
    }
    phi[c] = value;
  }
  return phi;
}

FreeSurfaceResult iterate_free_surface(const Mesh& mesh, const Material& base_material,
                                       const FreeSurfaceProblem& problem,
                                       const FreeSurfaceConfig& cfg,
                                       const AssemblyOptions& asm_opts,
                                       const SolveOptions& solve_opts) {
  if (!(cfg.epsilon > 0)) throw Error("free surface: epsilon must be positive");
  if (!(cfg.dry_factor > 0 && cfg.dry_factor < 1))
    throw Error("free surface: dry_factor must lie in (0, 1)");
  if (!(cfg.relaxation > 0 && cfg.relaxation <= 1))
    throw Error("free surface: relaxation must lie in (0, 1]");
  if (problem.upstream_head < problem.downstream_head)
    throw Error("free surface: upstream head below downstream head");

  FreeSurfaceState state;
  state.columns = build_columns(mesh);
  state.phi = Eigen::VectorXd::Constant(int(state.columns.size()), problem.upstream_head);
  state.exit_elevation = problem.upstream_head;  // first pass: fully wet dam

  const Box bb = mesh.bounding_box();
  const double ztol = 1e-9 * std::max(1.0, bb.extent().z());

  std::set<int> excluded;  // downstream nodes currently free (dry or inflow)
  Eigen::VectorXd heads;
  std::map<int, double> fixed;
  GlobalSystem sys;
  int switches = 0;  // seepage-face membership changes in the last iteration

  const int ne = int(mesh.elements.size());
  std::vector<int> elem_mat(ne);
  for (int e = 0; e < ne; ++e) elem_mat[e] = e;

  // Two-phase under-relaxation: the early surface descent from the fully wet
  // start tolerates a stronger factor; near the fixed point the base factor
  // keeps the permeability feedback from cycling.
  double omega = std::min(2.0 * cfg.relaxation, 0.5);
  const double coarse_change = 0.02 * (problem.upstream_head - problem.downstream_head);

  for (state.iteration = 1; state.iteration <= cfg.max_iters; ++state.iteration) {
    // Saturation is under-relaxed with the surface: the permeability update is
    // the other half of the fixed-point map, and damping only phi leaves a
    // cell-sized limit cycle on locally refined meshes.
    std::vector<double> sat_new = classify_elements(mesh, state);
    if (state.saturation.empty()) {
      state.saturation = std::move(sat_new);
    } else {
      for (int e = 0; e < ne; ++e)
        state.saturation[e] += omega * (sat_new[e] - state.saturation[e]);
    }
    state.wet_flags.resize(ne);
    for (int e = 0; e < ne; ++e) state.wet_flags[e] = state.saturation[e] > 0.5;
    std::vector<Material> mats(ne);
    for (int e = 0; e < ne; ++e)
      mats[e] = effective_material(base_material, state.saturation[e], cfg.dry_factor);
    sys = assemble_global(mesh, mats, elem_mat, asm_opts);

    OverflowUpdate upd = update_overflow_boundary(mesh, problem, excluded);
    fixed = upd.dirichlet;
    state.overflow_nodes = upd.overflow_nodes;
    for (int n : mesh.node_set(problem.upstream_set))
      if (mesh.nodes[n].z() <= problem.upstream_head + ztol)
        fixed[n] = problem.upstream_head;

    heads = solve_constrained(sys.Kg, Eigen::VectorXd::Zero(sys.n_dofs), fixed, solve_opts);

    // Seepage-face complementarity: a held node (h = z) whose reaction pumps
    // water in leaves the face; a free node whose pressure head turns positive
    // rejoins it. The pair of switches keeps p <= 0 and outflow only.
    // A face node stays on the seepage face only while it discharges a
    // non-negligible share of the peak outflow. The threshold filters the
    // spurious discharge the reduced dry-zone permeability still carries,
    // which would otherwise hold perched nodes above the true exit point.
    Eigen::VectorXd reaction = sys.Kg * heads;
    switches = 0;
    {
      const double theta = 1e-3;
      double maxout = 0.0;
      for (int n : state.overflow_nodes) maxout = std::max(maxout, -reaction[n]);
      const double rtol = -theta * maxout;
      for (int n : state.overflow_nodes)
        if (reaction[n] > rtol) { excluded.insert(n); ++switches; }
      // Readmission band: a freed node rejoins only on clearly positive
      // pressure. Without the gap, marginal nodes toggle between the two
      // rules and lock the iteration in a slow limit cycle.
      const double band = 1e-3 * (problem.upstream_head - problem.downstream_head);
      for (auto it = excluded.begin(); it != excluded.end();) {
        if (heads[*it] > mesh.nodes[*it].z() + band) {
          it = excluded.erase(it);
          ++switches;
        } else {
          ++it;
        }
      }
    }

    Eigen::VectorXd phi_new = recover_phi(mesh, state.columns, heads);
    Eigen::VectorXd phi_next = state.phi + omega * (phi_new - state.phi);
    for (int c = 0; c < phi_next.size(); ++c)
      phi_next[c] = std::clamp(phi_next[c], problem.downstream_head, problem.upstream_head);

    state.last_change = (phi_next - state.phi).cwiseAbs().maxCoeff();
    if (state.last_change < coarse_change) omega = cfg.relaxation;
    state.phi = phi_next;
    state.phi_history.push_back(state.phi);
    // Exit point: top of the seepage face still active after the switches.
    state.exit_elevation = problem.downstream_head;
    for (int n : state.overflow_nodes)
      if (!excluded.count(n))
        state.exit_elevation = std::max(state.exit_elevation, mesh.nodes[n].z());
    if (const char* d = std::getenv("PSBFEM_FS_TRACE"); d && *d)
      std::fprintf(stderr, "it %3d change %.6g exit %.6g overflow %zu excluded %zu switches %d omega %.3f\n",
                   state.iteration, state.last_change, state.exit_elevation,
                   state.overflow_nodes.size(), excluded.size(), switches, omega);

    if (state.last_change < cfg.epsilon) {
      state.converged = true;
      break;
    }
  }

  if (!state.converged) {
    std::ostringstream msg;
    msg << "free surface did not converge in " << cfg.max_iters
        << " iterations; last surface changes:";
    const int tail = std::min<int>(5, int(state.phi_history.size()) - 1);
    for (int i = int(state.phi_history.size()) - tail; i < int(state.phi_history.size()); ++i)
      msg << ' '
          << (state.phi_history[i] - state.phi_history[i - 1]).cwiseAbs().maxCoeff();
    throw NumericalError(msg.str());
  }

  FreeSurfaceResult out;
  out.state = std::move(state);

  FieldResult& res = out.field;
  res.heads = heads;
  res.times = {0.0};
  res.reactions = sys.Kg * heads;
  for (const auto& [n, v] : fixed) res.dirichlet_nodes.push_back(n);
  {
    double num = 0.0;
    Eigen::VectorXd r = res.reactions;
    for (int i = 0; i < r.size(); ++i)
      if (!fixed.count(i)) num += r[i] * r[i];
    res.residual = std::sqrt(num) / std::max(res.heads.norm(), 1e-300);
  }
  res.element_flux.resize(ne);
  for (int e = 0; e < ne; ++e) {
    Material m = effective_material(base_material, out.state.saturation[e], cfg.dry_factor);
    res.element_flux[e] = element_centroid_flux(mesh, e, m, heads);
  }
  if (!problem.monitors.empty()) {
    std::vector<Material> mats(ne);
    for (int e = 0; e < ne; ++e)
      mats[e] = effective_material(base_material, out.state.saturation[e], cfg.dry_factor);
    MonitorSampler sampler(mesh, mats, elem_mat, problem.monitors);
    res.monitor_history.resize(problem.monitors.size());
    for (size_t m = 0; m < problem.monitors.size(); ++m)
      res.monitor_history[m].push_back(sampler.sample(int(m), heads));
  }
  return out;
}

void write_surface_history(const FreeSurfaceState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "iteration,x,y,phi\n" << std::setprecision(12);
  for (size_t it = 0; it < state.phi_history.size(); ++it)
    for (size_t c = 0; c < state.columns.size(); ++c)
      out << (it + 1) << ',' << state.columns[c].xy.x() << ',' << state.columns[c].xy.y()
          << ',' << state.phi_history[it][int(c)] << '\n';
}

} // namespace psbfem
