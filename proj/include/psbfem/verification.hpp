#pragma once

#include "psbfem/element.hpp"
#include "psbfem/mesh.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <map>

namespace psbfem {

/// Conforming linear-tetrahedron mesh; the independent FEM reference.
struct TetMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;
  std::map<std::string, std::vector<int>> node_sets;
};

/// Structured box split into 6 tetrahedra per cell (Kuhn triangulation, which
/// is conforming across cells). Node sets "xmin".."zmax" as in make_box_grid.
TetMesh make_box_tet_grid(const Box& domain, std::array<int, 3> divisions);

Eigen::SparseMatrix<double> tet_fem_stiffness(const TetMesh& tmesh, const Mat3& k);

/// Direct solve with the given fixed nodal heads; exact for affine fields.
Eigen::VectorXd tet_fem_solve(const TetMesh& tmesh, const Mat3& k,
                              const std::map<int, double>& fixed);

/// P1 interpolation at a point; throws Error if p lies in no tetrahedron.
double tet_interpolate(const TetMesh& tmesh, const Eigen::VectorXd& heads, const Vec3& p);

/// Element stiffness via an ordered complex Schur decomposition of Zp: the
/// invariant subspace of the positive-real-part eigenvalues gives
/// K = Re(U_q U_h^{-1}). Algorithmically independent of eigen_split (no
/// eigenvector matrix of individual modes).
Eigen::MatrixXd schur_stiffness_oracle(const ElementCoefficients& coeffs);

/// Element mass via Gauss-Legendre quadrature of the radial integral
/// m_ij = m0_ij * \int_0^1 xi^(lambda_i + lambda_j + 1) dxi instead of the
/// closed form. n_radial >= 8 points.
Eigen::MatrixXd radial_mass_oracle(const ModalBasis& mb, const Eigen::MatrixXd& M0,
                                   int n_radial);

/// Gauss-Legendre nodes/weights on [0, 1] (Golub-Welsch).
void gauss_legendre_01(int n, Eigen::VectorXd& points, Eigen::VectorXd& weights);

/// One random valid single-element mesh: an affinely mapped cube, tetrahedron,
/// frustum or octahedron (affine maps keep faces planar and the element
/// star-convex). Deterministic in the seed.
Mesh random_element(std::uint32_t seed);

/// Seeded corpus for the element-level property suite.
std::vector<Mesh> element_corpus(int count, std::uint32_t seed);

} // namespace psbfem
