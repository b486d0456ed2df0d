#pragma once

#include "psbfem/free_surface.hpp"
#include "psbfem/solver.hpp"

#include <optional>
#include <string>

namespace psbfem {

enum class AnalysisKind { kSteady, kTransient, kFreeSurface };

/// Node set defined by an axis-aligned box predicate, evaluated after the
/// mesh is built; lets case files carve boundary sets out of generator output.
struct BoxNodeSet {
  std::string name;
  Box box;
};

struct OutputSpec {
  std::string vtk;          // empty = skip
  std::string monitors_csv;
  std::string summary;
  std::string surface_csv;  // free-surface iteration history
};

/// Reference data for self-reported errors in the summary.
struct ReferenceSpec {
  // Exact affine head field a + g.x; enables max nodal relative error.
  std::optional<std::pair<double, Vec3>> linear;  // (offset, gradient)
  std::vector<double> monitor_values;             // expected head per monitor
};

/// Full analysis description as loaded from a JSON case file.
struct AnalysisCase {
  std::string name;
  std::string mesh_path;   // exclusive with generator
  std::string generator;   // "box", "octree_box", "patch", "trapezoid_dam"
  // Generator parameters (interpreted per generator name).
  Box domain;
  std::array<int, 3> divisions{1, 1, 1};
  Box refine_region;
  int octree_levels = 0;
  double dam_height = 0, dam_crest = 0, dam_slope_left = 0, dam_slope_right = 0,
         dam_thickness = 0;

  std::vector<BoxNodeSet> extra_node_sets;

  std::vector<Material> materials;
  std::vector<int> element_material;  // empty = all material 0

  BoundarySpec boundary;
  AnalysisKind kind = AnalysisKind::kSteady;
  TransientConfig transient;
  FreeSurfaceConfig free_surface;
  FreeSurfaceProblem fs_problem;

  AssemblyOptions assembly;
  SolveOptions solve;
  OutputSpec output;
  ReferenceSpec reference;
};

AnalysisCase load_case(const std::string& path);

/// Builds the mesh from the case's path or generator and applies the extra
/// node sets. The mesh is validated.
Mesh build_case_mesh(const AnalysisCase& cs);

struct CaseSummary {
  std::string name;
  int n_nodes = 0, n_elements = 0;
  double residual = 0.0;
  std::vector<std::pair<std::string, double>> monitor_values;  // at final time
  std::vector<double> monitor_rel_errors;  // vs reference, if given
  std::optional<double> max_linear_rel_error;
  int fs_iterations = 0;
  double fs_exit_elevation = 0.0;
  double runtime_seconds = 0.0;

  std::string to_json() const;
};

/// Runs the analysis, writes the requested outputs, returns the summary.
CaseSummary run_case(const AnalysisCase& cs, int threads = 1);

} // namespace psbfem
