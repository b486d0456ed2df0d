#pragma once

#include "psbfem/mesh.hpp"
#include "psbfem/wachspress.hpp"

#include <complex>
#include <optional>

namespace psbfem {

/// Hydraulic material data.
struct Material {
  Mat3 k = Mat3::Identity();  // conductivity tensor (m/s), SPD
  double Ss = 0.0;            // specific storage (1/m)
  std::string name;

  static Material isotropic(double ks, double Ss = 0.0, std::string name = "") {
    Material m;
    m.k = ks * Mat3::Identity();
    m.Ss = Ss;
    m.name = std::move(name);
    return m;
  }
};

/// Boundary Jacobian data at one face quadrature point. Coordinates are
/// relative to the scaling centre.
struct FaceGeometryAtPoint {
  Mat3 Jb;        // rows: position, d/deta, d/dzeta
  double detJb;   // > 0 for outward-wound faces
  Vec3 b1, b2, b3;
};

/// One boundary face of an element, prepared for integration: the local
/// polygon frame, node coordinates relative to the scaling centre (columns
/// follow the polygon vertex order), the element-local node indices, and the
/// quadrature rule.
struct ElementFaceContext {
  LocalPolygon poly;
  Eigen::Matrix3Xd coords;       // relative to scaling centre
  std::vector<int> local_nodes;  // into ElementGeometry::nodes
  QuadratureRule rule;
  int face_id = -1;
};

/// Per-element geometric context for the scaled boundary pipeline.
struct ElementGeometry {
  int element_id = -1;
  Vec3 centre;             // scaling centre = volume centroid
  double volume = 0.0;
  std::vector<int> nodes;  // global node ids, deterministic local order
  std::vector<ElementFaceContext> faces;

  static ElementGeometry build(const Mesh& mesh, int elem, int gauss_order = 3,
                               int subdivisions = 1);
};

FaceGeometryAtPoint face_geometry(const ElementFaceContext& face, const Vec2& qp);

/// Face-level contributions to the coefficient matrices, in face-local node
/// order (n_face x n_face).
struct FaceCoefficients {
  Eigen::MatrixXd E0, E1, E2, M0;
};

FaceCoefficients face_coefficients(const ElementFaceContext& face, const Material& mat);

/// Coefficient matrices of a whole element, assembled over its faces.
struct ElementCoefficients {
  Eigen::MatrixXd E0, E1, E2, M0;
};

ElementCoefficients assemble_element_coeffs(const ElementGeometry& geom, const Material& mat);

struct HamiltonianSystem {
  Eigen::MatrixXd Zp;  // 2n x 2n
};

/// Zp = [[-E0^-1 E1^T + I/2, E0^-1], [E2 - E1 E0^-1 E1^T, E1 E0^-1 - I/2]].
/// Throws NumericalError if E0 is not SPD or its condition exceeds 1e12.
HamiltonianSystem build_hamiltonian(const ElementCoefficients& coeffs);

/// The bounded modal block: eigenpairs of Zp with positive real part. With
/// this block the radial head solution is Phi_h1 * xi^(Lambda - I/2) * c,
/// finite at the scaling centre; the constant-head mode sits at lambda = 1/2.
struct ModalBasis {
  Eigen::MatrixXcd Phi_h1;  // modal head components (n x n)
  Eigen::MatrixXcd Phi_q1;  // modal flux components
  Eigen::VectorXcd lambda;  // selected Zp eigenvalues, Re > 0
  double cond_Phi_h1 = 0.0;
};

ModalBasis eigen_split(const HamiltonianSystem& ham, const std::string& context = "");

/// K = Phi_q1 Phi_h1^-1, real part taken after asserting the imaginary
/// residue, symmetrized after asserting asymmetry <= 1e-4 relative.
Eigen::MatrixXd element_stiffness(const ModalBasis& mb, const std::string& context = "");

/// M = Phi_h1^-T m Phi_h1^-1 with m_ij = (Phi_h1^T M0 Phi_h1)_ij / (lambda_i + lambda_j + 2).
Eigen::MatrixXd element_mass(const ModalBasis& mb, const Eigen::MatrixXd& M0,
                             const std::string& context = "");

/// Semi-analytical element operators.
struct ElementOperators {
  Eigen::MatrixXd K;  // conductance (m^2/s)
  Eigen::MatrixXd M;  // storage (m^2)
  std::vector<int> nodes;
};

ElementOperators compute_element_operators(const Mesh& mesh, int elem, const Material& mat,
                                           int gauss_order = 3, int subdivisions = 1);

/// Integration constants c = Phi_h1^-1 h for given boundary nodal heads.
Eigen::VectorXcd integration_constants(const ModalBasis& mb, const Eigen::VectorXd& heads);

/// Radial head solution h(xi) = Phi_h1 xi^(Lambda - I/2) c, 0 < xi <= 1.
Eigen::VectorXd radial_heads(const ModalBasis& mb, const Eigen::VectorXcd& c, double xi);

/// Head at an interior sample (xi, eta, zeta) on the ray through `face`:
/// the Wachspress interpolation of radial_heads restricted to the face nodes.
double internal_field(const ModalBasis& mb, const Eigen::VectorXcd& c,
                      const ElementFaceContext& face, double xi, const Vec2& qp);

/// Radial sample locating a global point inside the element: the boundary
/// intersection of the ray centre -> p gives the face and (eta, zeta), and
/// xi = |p - centre| / |boundary point - centre|.
struct RadialSample {
  int face_index = -1;
  double xi = 0.0;
  Vec2 qp;
};

std::optional<RadialSample> locate_radial(const ElementGeometry& geom, const Vec3& p);

/// True if p lies inside or on the element (star-convex test against all faces).
bool element_contains(const ElementGeometry& geom, const Vec3& p, double tol = 1e-9);

} // namespace psbfem
