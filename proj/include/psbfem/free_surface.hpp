#pragma once

#include "psbfem/solver.hpp"

#include <set>

namespace psbfem {

/// Fixed-mesh free-surface iteration controls.
struct FreeSurfaceConfig {
  double epsilon = 1e-4;    // convergence tolerance on surface elevation (m)
  int max_iters = 100;
  double dry_factor = 1e-3; // permeability reduction in the dry region
  double relaxation = 0.5;  // under-relaxation of the surface update, (0, 1]
};

/// Steady free-surface problem: prescribed water levels on the upstream and
/// downstream faces, seepage (overflow) boundary resolved on the downstream
/// face, impermeable base.
struct FreeSurfaceProblem {
  std::string upstream_set;    // node set of the upstream face
  std::string downstream_set;  // node set of the downstream face
  double upstream_head = 0.0;  // upstream water level (m)
  double downstream_head = 0.0;
  std::vector<Monitor> monitors;
};

/// Free-surface elevation tracked on vertical node columns: mesh nodes that
/// share a horizontal (x, y) position, sorted by elevation.
struct SurfaceColumn {
  Vec2 xy;
  std::vector<int> nodes;  // ascending z
};

struct FreeSurfaceState {
  std::vector<SurfaceColumn> columns;
  Eigen::VectorXd phi;              // surface elevation per column
  std::vector<int> overflow_nodes;  // downstream nodes currently under h = z
  std::vector<char> wet_flags;        // per element (saturation > 1/2)
  std::vector<double> saturation;     // per element wet-height fraction in [0, 1]
  int iteration = 0;
  bool converged = false;
  double exit_elevation = 0.0;      // surface intersection with the downstream face
  double last_change = 0.0;         // max column change of the final update
  std::vector<Eigen::VectorXd> phi_history;  // one entry per iteration
};

/// Groups mesh nodes into vertical columns (horizontal positions quantized by
/// a tolerance scaled to the footprint). Columns with a single node carry no
/// surface information and are dropped. Falls back to chained columns when
/// the mesh has no vertical stacking (sheared structured meshes).
std::vector<SurfaceColumn> build_columns(const Mesh& mesh);

/// Columns built by chaining each node to the nearest column top on the
/// level below, within a quarter of the in-level node spacing. Handles
/// meshes whose "vertical" mesh lines tilt, such as the trapezoidal dam.
std::vector<SurfaceColumn> build_chained_columns(const Mesh& mesh);

/// Horizontal position of a (possibly slanted) column at elevation z,
/// interpolated along its node chain and clamped at the ends.
Vec2 column_xy_at(const Mesh& mesh, const SurfaceColumn& col, double z);

/// Surface elevation at a point: value of the column nearest in the
/// horizontal plane at the query elevation.
double phi_at(const Mesh& mesh, const FreeSurfaceState& state, const Vec3& p);

/// Wet-height fraction of each element: the part of its vertical extent lying
/// below the surface, clamped to [0, 1]. Continuous in phi, which keeps the
/// fixed-point iteration from flip-flopping elements the surface cuts.
std::vector<double> classify_elements(const Mesh& mesh, const FreeSurfaceState& state);

/// Base material with the conductivity blended between dry_factor*k (dry) and
/// k (fully wet) by the element's wet-height fraction.
Material effective_material(const Material& base, double saturation, double dry_factor);

/// Downstream Dirichlet data for the seepage face: nodes at or below the
/// downstream level keep h = downstream head, nodes between the downstream
/// and upstream levels enter the face with h = z unless listed in `excluded`,
/// nodes above the upstream level stay natural. Membership is then corrected
/// by complementarity each iteration: held nodes with inward flux leave, free
/// nodes with positive pressure head rejoin.
struct OverflowUpdate {
  std::vector<int> overflow_nodes;
  std::map<int, double> dirichlet;
};

OverflowUpdate update_overflow_boundary(const Mesh& mesh, const FreeSurfaceProblem& problem,
                                        const std::set<int>& excluded);

/// Per-column surface recovery: the zero crossing of the pressure head
/// p = h - z along the column, by linear interpolation between nodes.
Eigen::VectorXd recover_phi(const Mesh& mesh, const std::vector<SurfaceColumn>& columns,
                            const Eigen::VectorXd& heads);

struct FreeSurfaceResult {
  FieldResult field;
  FreeSurfaceState state;
};

/// Fixed-mesh iteration: solve steady seepage, recover the surface from the
/// pressure-head zero crossing, under-relax, reclassify wet/dry permeability
/// and the overflow boundary, repeat until the maximum column change drops
/// below epsilon. Throws NumericalError on non-convergence, reporting the
/// last changes for oscillation diagnosis.
FreeSurfaceResult iterate_free_surface(const Mesh& mesh, const Material& base_material,
                                       const FreeSurfaceProblem& problem,
                                       const FreeSurfaceConfig& cfg = {},
                                       const AssemblyOptions& asm_opts = {},
                                       const SolveOptions& solve_opts = {});

/// Surface iteration history as CSV: iteration, column x, column y, phi.
void write_surface_history(const FreeSurfaceState& state, const std::string& path);

} // namespace psbfem
