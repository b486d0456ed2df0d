#pragma once

#include "psbfem/common.hpp"

#include <span>
#include <vector>

namespace psbfem {

/// Planar convex polygon expressed in its own orthonormal in-plane frame.
/// `vertices` are (eta, zeta) coordinates, counter-clockwise. The frame maps
/// local (eta, zeta) back to global space as origin + eta*axis_eta + zeta*axis_zeta.
struct LocalPolygon {
  std::vector<Vec2> vertices;
  Vec3 origin = Vec3::Zero();
  Vec3 axis_eta = Vec3::UnitX();
  Vec3 axis_zeta = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();

  int size() const { return int(vertices.size()); }
  Vec3 to_global(const Vec2& p) const { return origin + p.x() * axis_eta + p.y() * axis_zeta; }
  Vec2 to_local(const Vec3& p) const {
    Vec3 d = p - origin;
    return {d.dot(axis_eta), d.dot(axis_zeta)};
  }
  Vec2 centroid() const;
  double area() const;
  bool contains(const Vec2& p, double tol = 0.0) const;
};

/// Builds the in-plane frame from an ordered 3D vertex loop: normal from
/// Newell's method, first axis along the first edge, second axis completing
/// the right-handed frame. The projected loop is CCW in (eta, zeta).
LocalPolygon make_local_polygon(std::span<const Vec3> loop);

/// Shape values and in-plane gradients at one point.
struct BasisEval {
  Eigen::VectorXd N;
  Eigen::VectorXd dN_deta;
  Eigen::VectorXd dN_dzeta;
};

/// Wachspress coordinates on a convex polygon, with the ratio-rule gradient
/// grad N_v = N_v (R_v - sum_u N_u R_u), R_v = p_{e1} + p_{e2}.
/// Throws NumericalError if the point is on or outside the boundary.
BasisEval wachspress_eval(const LocalPolygon& poly, const Vec2& p);

/// Max absolute discrepancy between analytic gradients and central finite
/// differences of step `step`; test-suite support.
double wachspress_grad_check(const LocalPolygon& poly, const Vec2& p, double step);

/// Area-weighted quadrature over the polygon in (eta, zeta): fan triangulation
/// about the centroid, a symmetric Gauss rule per triangle.
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;  // sum = polygon area
};

/// gauss_order is points per triangle: 1 (degree 1), 3 (degree 2),
/// 6 (degree 4) or 12 (degree 6). subdivisions > 1 applies the rule as a
/// composite over a uniform refinement of each fan triangle; the integrands
/// on general polygons are rational, so the fixed-order rule is inexact and
/// the composite form recovers high accuracy where it matters (oracles).
QuadratureRule triangulate_and_quadrature(const LocalPolygon& poly, int gauss_order,
                                          int subdivisions = 1);

/// True if every corner turns strictly left (no collinear vertices).
bool strictly_convex(const LocalPolygon& poly, double rel_tol = 1e-10);

/// Decomposition into strictly convex pieces, as vertex-index lists: the
/// polygon itself when already strict, otherwise an ear triangulation over
/// the existing vertices. Wachspress assigns a collinear (hanging) vertex an
/// identically zero weight, so faces with hanging nodes must be interpolated
/// piecewise to keep the trace conforming.
std::vector<std::vector<int>> convex_pieces(const LocalPolygon& poly);

} // namespace psbfem
