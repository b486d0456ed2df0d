#include "psbfem/case.hpp"

#include "psbfem/io.hpp"
#include "psbfem/mesh_gen.hpp"

#include "json.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace psbfem {

using nlohmann::json;

namespace {

Vec3 to_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(std::string("expected [x, y, z] for ") + what);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Box to_box(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2)
    throw ParseError(std::string("expected [[lo], [hi]] for ") + what);
  return {to_vec3(j[0], what), to_vec3(j[1], what)};
}

Mat3 to_conductivity(const json& j) {
  if (j.is_number()) return j.get<double>() * Mat3::Identity();
  if (j.is_array() && j.size() == 3 && j[0].is_number()) {
    Mat3 k = Mat3::Zero();
    for (int i = 0; i < 3; ++i) k(i, i) = j[i].get<double>();
    return k;
  }
  if (j.is_array() && j.size() == 3 && j[0].is_array()) {
    Mat3 k;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) k(r, c) = j[r][c].get<double>();
    return k;
  }
  throw ParseError("conductivity must be a scalar, a 3-vector or a 3x3 matrix");
}

TimeSeries to_series(const json& j) {
  if (j.contains("value")) return TimeSeries::constant(j.at("value").get<double>());
  if (j.contains("series")) {
    TimeSeries ts;
    for (const auto& row : j.at("series"))
      ts.points.emplace_back(row[0].get<double>(), row[1].get<double>());
    if (ts.points.empty()) throw ParseError("empty time series");
    for (size_t i = 1; i < ts.points.size(); ++i)
      if (ts.points[i].first <= ts.points[i - 1].first)
        throw ParseError("time series rows must have strictly increasing times");
    return ts;
  }
  throw ParseError("Dirichlet entry needs 'value' or 'series'");
}

} // namespace

AnalysisCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw ParseError("case file '" + path + "': " + ex.what());
  }

  AnalysisCase cs;
  try {
    cs.name = j.value("name", path);

    const json& mj = j.at("mesh");
    if (mj.contains("path")) {
      cs.mesh_path = mj.at("path").get<std::string>();
    } else {
      const json& g = mj.at("generator");
      cs.generator = g.at("name").get<std::string>();
      if (cs.generator == "box" || cs.generator == "octree_box") {
        cs.domain = to_box(g.at("domain"), "mesh.generator.domain");
        if (g.contains("divisions")) {
          for (int d = 0; d < 3; ++d) cs.divisions[d] = g.at("divisions")[d].get<int>();
        } else {
          const double size = g.at("size").get<double>();
          if (!(size > 0)) throw ParseError("generator size must be positive");
          for (int d = 0; d < 3; ++d)
            cs.divisions[d] = std::max(1, int(std::lround(cs.domain.extent()[d] / size)));
        }
      }
      if (cs.generator == "octree_box") {
        cs.refine_region = to_box(g.at("refine_region"), "refine_region");
        cs.octree_levels = g.at("levels").get<int>();
      }
      if (cs.generator == "trapezoid_dam") {
        cs.dam_height = g.at("height").get<double>();
        cs.dam_crest = g.at("crest_width").get<double>();
        cs.dam_slope_left = g.at("slope_left").get<double>();
        cs.dam_slope_right = g.at("slope_right").get<double>();
        cs.dam_thickness = g.at("thickness").get<double>();
        for (int d = 0; d < 3; ++d) cs.divisions[d] = g.at("divisions")[d].get<int>();
      }
    }

    for (const auto& s : j.value("node_sets", json::array()))
      cs.extra_node_sets.push_back(
          {s.at("name").get<std::string>(), to_box(s.at("box"), "node set box")});

    for (const auto& m : j.at("materials")) {
      Material mat;
      mat.name = m.value("name", "");
      mat.k = to_conductivity(m.at("k"));
      mat.Ss = m.value("Ss", 0.0);
      cs.materials.push_back(mat);
    }
    if (j.contains("element_material") && j.at("element_material").is_array())
      cs.element_material = j.at("element_material").get<std::vector<int>>();

    const json& bj = j.value("boundary", json::object());
    for (const auto& d : bj.value("dirichlet", json::array()))
      cs.boundary.dirichlet.push_back({d.at("node_set").get<std::string>(), to_series(d)});
    for (const auto& f : bj.value("flux", json::array()))
      cs.boundary.flux.push_back(
          {f.at("face_set").get<std::string>(), f.at("value").get<double>()});
    for (const auto& m : j.value("monitors", json::array()))
      cs.boundary.monitors.push_back(
          {m.at("label").get<std::string>(), to_vec3(m.at("point"), "monitor point")});

    const json& aj = j.at("analysis");
    const std::string kind = aj.at("kind").get<std::string>();
    if (kind == "steady") {
      cs.kind = AnalysisKind::kSteady;
    } else if (kind == "transient") {
      cs.kind = AnalysisKind::kTransient;
      cs.transient.dt = aj.at("dt").get<double>();
      cs.transient.n_steps = aj.at("n_steps").get<int>();
      cs.transient.output_stride = aj.value("output_stride", 1);
      cs.transient.initial_steady = aj.value("initial_steady", true);
      cs.transient.initial_value = aj.value("initial_value", 0.0);
    } else if (kind == "free_surface") {
      cs.kind = AnalysisKind::kFreeSurface;
      const json& fj = aj.at("free_surface");
      cs.free_surface.epsilon = fj.value("epsilon", cs.free_surface.epsilon);
      cs.free_surface.max_iters = fj.value("max_iters", cs.free_surface.max_iters);
      cs.free_surface.dry_factor = fj.value("dry_factor", cs.free_surface.dry_factor);
      cs.free_surface.relaxation = fj.value("relaxation", cs.free_surface.relaxation);
      cs.fs_problem.upstream_set = fj.at("upstream_set").get<std::string>();
      cs.fs_problem.downstream_set = fj.at("downstream_set").get<std::string>();
      cs.fs_problem.upstream_head = fj.at("upstream_head").get<double>();
      cs.fs_problem.downstream_head = fj.at("downstream_head").get<double>();
      cs.fs_problem.monitors = cs.boundary.monitors;
    } else {
      throw ParseError("unknown analysis kind '" + kind + "'");
    }

    const json& sj = j.value("solver", json::object());
    cs.solve.use_cg = sj.value("use_cg", false);
    cs.solve.rel_tol = sj.value("rel_tol", 1e-10);
    cs.assembly.gauss_order = sj.value("gauss_order", 3);

    const json& oj = j.value("output", json::object());
    cs.output.vtk = oj.value("vtk", "");
    cs.output.monitors_csv = oj.value("monitors_csv", "");
    cs.output.summary = oj.value("summary", "");
    cs.output.surface_csv = oj.value("surface_csv", "");

    const json& rj = j.value("reference", json::object());
    if (rj.contains("linear"))
      cs.reference.linear = {rj.at("linear").value("offset", 0.0),
                             to_vec3(rj.at("linear").at("gradient"), "reference gradient")};
    if (rj.contains("monitor_values"))
      cs.reference.monitor_values = rj.at("monitor_values").get<std::vector<double>>();
  } catch (const json::exception& ex) {
    throw ParseError("case file '" + path + "': " + ex.what());
  }

  if (cs.materials.empty()) throw ParseError("case file needs at least one material");
  return cs;
}

Mesh build_case_mesh(const AnalysisCase& cs) {
  Mesh mesh;
  if (!cs.mesh_path.empty()) {
    mesh = load_mesh(cs.mesh_path);
  } else if (cs.generator == "box") {
    mesh = make_box_grid(cs.domain, cs.divisions);
  } else if (cs.generator == "octree_box") {
    mesh = octree_refine_box(cs.domain, cs.divisions, cs.refine_region, cs.octree_levels);
  } else if (cs.generator == "patch") {
    mesh = make_patch_mesh();
  } else if (cs.generator == "trapezoid_dam") {
    mesh = make_trapezoid_dam(cs.dam_height, cs.dam_crest, cs.dam_slope_left,
                              cs.dam_slope_right, cs.dam_thickness, cs.divisions);
  } else {
    throw ParseError("unknown mesh generator '" + cs.generator + "'");
  }
  for (const auto& s : cs.extra_node_sets)
    add_node_set(mesh, s.name, [&](const Vec3& p) { return s.box.contains(p, 1e-9); });
  return mesh;
}

std::string CaseSummary::to_json() const {
  json j;
  j["name"] = name;
  j["n_nodes"] = n_nodes;
  j["n_elements"] = n_elements;
  j["residual"] = residual;
  json mv = json::object();
  for (const auto& [label, value] : monitor_values) mv[label] = value;
  j["monitors"] = mv;
  if (!monitor_rel_errors.empty()) j["monitor_rel_errors"] = monitor_rel_errors;
  if (max_linear_rel_error) j["max_linear_rel_error"] = *max_linear_rel_error;
  if (fs_iterations > 0) {
    j["free_surface_iterations"] = fs_iterations;
    j["exit_elevation"] = fs_exit_elevation;
  }
  j["runtime_seconds"] = runtime_seconds;
  return j.dump(2);
}

CaseSummary run_case(const AnalysisCase& cs, int threads) {
  const auto t0 = std::chrono::steady_clock::now();

  Mesh mesh = build_case_mesh(cs);
  std::vector<int> elem_mat = cs.element_material;
  if (elem_mat.empty()) elem_mat.assign(mesh.elements.size(), 0);
  if (elem_mat.size() != mesh.elements.size())
    throw ParseError("element_material length does not match the element count");

  AssemblyOptions asm_opts = cs.assembly;
  asm_opts.threads = std::max(1, threads);

  FieldResult field;
  CaseSummary sum;
  sum.name = cs.name;
  sum.n_nodes = int(mesh.nodes.size());
  sum.n_elements = int(mesh.elements.size());

  if (cs.kind == AnalysisKind::kFreeSurface) {
    FreeSurfaceResult fr = iterate_free_surface(mesh, cs.materials.at(0), cs.fs_problem,
                                                cs.free_surface, asm_opts, cs.solve);
    field = std::move(fr.field);
    sum.fs_iterations = fr.state.iteration;
    sum.fs_exit_elevation = fr.state.exit_elevation;
    if (!cs.output.surface_csv.empty()) write_surface_history(fr.state, cs.output.surface_csv);
  } else {
    GlobalSystem sys = assemble_global(mesh, cs.materials, elem_mat, asm_opts);
    if (cs.kind == AnalysisKind::kSteady)
      field = solve_steady(mesh, sys, cs.boundary, cs.materials, elem_mat, cs.solve);
    else
      field = run_transient(mesh, sys, cs.boundary, cs.transient, cs.materials, elem_mat,
                            cs.solve);
  }

  sum.residual = field.residual;
  const auto& monitors =
      cs.kind == AnalysisKind::kFreeSurface ? cs.fs_problem.monitors : cs.boundary.monitors;
  for (size_t m = 0; m < monitors.size(); ++m)
    sum.monitor_values.emplace_back(monitors[m].label, field.monitor_history[m].back());
  if (!cs.reference.monitor_values.empty()) {
    if (cs.reference.monitor_values.size() != monitors.size())
      throw ParseError("reference monitor_values length does not match the monitor count");
    for (size_t m = 0; m < monitors.size(); ++m) {
      const double ref = cs.reference.monitor_values[m];
      sum.monitor_rel_errors.push_back(std::abs(sum.monitor_values[m].second - ref) /
                                       std::max(std::abs(ref), 1e-300));
    }
  }
  if (cs.reference.linear) {
    const auto& [offset, grad] = *cs.reference.linear;
    double worst = 0.0, scale = 0.0;
    for (size_t n = 0; n < mesh.nodes.size(); ++n)
      scale = std::max(scale, std::abs(offset + grad.dot(mesh.nodes[n])));
    for (size_t n = 0; n < mesh.nodes.size(); ++n)
      worst = std::max(worst,
                       std::abs(field.heads[int(n)] - (offset + grad.dot(mesh.nodes[n]))));
    sum.max_linear_rel_error = worst / std::max(scale, 1e-300);
  }

  if (!cs.output.vtk.empty()) {
    ExportFields fields;
    fields.point_data["head"] = field.heads;
    Eigen::VectorXd qmag(sum.n_elements);
    for (int e = 0; e < sum.n_elements; ++e) qmag[e] = field.element_flux[e].norm();
    fields.cell_data["flux_magnitude"] = qmag;
    export_vtk(mesh, fields, cs.output.vtk);
  }
  if (!cs.output.monitors_csv.empty() && !monitors.empty()) {
    std::vector<std::string> labels;
    for (const auto& m : monitors) labels.push_back(m.label);
    write_monitor_csv(cs.output.monitors_csv, field.times, labels, field.monitor_history);
  }

  sum.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!cs.output.summary.empty()) {
    std::ofstream out(cs.output.summary);
    if (!out) throw Error("cannot open '" + cs.output.summary + "' for writing");
    out << sum.to_json() << '\n';
  }
  return sum;
}

} // namespace psbfem
