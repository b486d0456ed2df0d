#pragma once

#include "psbfem/mesh.hpp"

#include <array>
#include <functional>

namespace psbfem {

/// Structured hexahedral grid over an axis-aligned box. Adds node sets
/// "xmin","xmax","ymin","ymax","zmin","zmax" and matching boundary face sets.
Mesh make_box_grid(const Box& domain, std::array<int, 3> divisions);

/// Octree refinement of a base grid: cells whose interior intersects
/// `refine_region` are split 8-ways per level. Transition faces are stored as
/// the fine sub-face polygons, so coarse cells next to refined ones become
/// polyhedra with more than 6 faces and hanging vertices on their face loops.
/// levels = 0 returns the plain base grid.
Mesh octree_refine_box(const Box& domain, std::array<int, 3> base_divisions,
                       const Box& refine_region, int levels);

/// Five-element patch over [0,1] x [0,1] x [0,3]: one 9-face polyhedron below
/// a tilted interior plane near z = 2, four hexahedra above it. The interface
/// carries a 2x2 sub-face split, so the bottom element exercises the general
/// polyhedral path.
Mesh make_patch_mesh();

/// Trapezoidal prism dam: cross-section with sloped upstream/downstream
/// faces, extruded in y. All cell faces are planar by construction.
/// Node sets: "upstream" (left slope), "downstream" (right slope),
/// "zmin" (base).
Mesh make_trapezoid_dam(double height, double crest_width, double slope_left,
                        double slope_right, double thickness,
                        std::array<int, 3> divisions);

/// Nodes satisfying a predicate, in index order.
std::vector<int> select_nodes(const Mesh& mesh, const std::function<bool(const Vec3&)>& pred);

/// Adds (or replaces) a node set from a coordinate predicate.
void add_node_set(Mesh& mesh, const std::string& name,
                  const std::function<bool(const Vec3&)>& pred);

} // namespace psbfem
