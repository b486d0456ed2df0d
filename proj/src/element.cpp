#include "psbfem/element.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <map>
#include <numeric>
#include <sstream>

namespace psbfem {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

ElementGeometry ElementGeometry::build(const Mesh& mesh, int elem, int gauss_order,
                                       int subdivisions) {
  ElementGeometry g;
  g.element_id = elem;
  g.centre = mesh.scaling_centre(elem);
  g.volume = mesh.element_volume(elem);
  g.nodes = mesh.element_nodes(elem);

  std::map<int, int> local;
  for (size_t i = 0; i < g.nodes.size(); ++i) local[g.nodes[i]] = int(i);

  for (const auto& fr : mesh.elements.at(elem).faces) {
    // Faces with hanging (collinear) vertices are handled as strictly convex
    // pieces so every node is interpolated; see convex_pieces. The
    // decomposition is computed on the STORED face loop so the two elements
    // sharing the face get identical pieces (ear clipping is not invariant
    // under loop reversal, and differing pieces break trace conformity).
    const auto& stored = mesh.faces.at(fr.face).nodes;
    std::vector<Vec3> pts(stored.size());
    for (size_t i = 0; i < stored.size(); ++i) pts[i] = mesh.nodes[stored[i]] - g.centre;
    LocalPolygon full = make_local_polygon(pts);

    for (auto piece : convex_pieces(full)) {
      if (fr.sign < 0) std::reverse(piece.begin(), piece.end());
      std::vector<Vec3> ppts(piece.size());
      for (size_t i = 0; i < piece.size(); ++i) ppts[i] = pts[piece[i]];

      ElementFaceContext fc;
      fc.face_id = fr.face;
      fc.poly = make_local_polygon(ppts);
      fc.coords.resize(3, int(piece.size()));
      fc.local_nodes.resize(piece.size());
      for (size_t i = 0; i < piece.size(); ++i) {
        fc.coords.col(int(i)) = ppts[i];
        fc.local_nodes[i] = local.at(stored[piece[i]]);
      }
      fc.rule = triangulate_and_quadrature(fc.poly, gauss_order, subdivisions);
      g.faces.push_back(std::move(fc));
    }
  }
  return g;
}

FaceGeometryAtPoint face_geometry(const ElementFaceContext& face, const Vec2& qp) {
  BasisEval basis = wachspress_eval(face.poly, qp);
  const Vec3 pos = face.coords * basis.N;
  const Vec3 t_eta = face.coords * basis.dN_deta;
  const Vec3 t_zeta = face.coords * basis.dN_dzeta;

  FaceGeometryAtPoint out;
  out.Jb.row(0) = pos;
  out.Jb.row(1) = t_eta;
  out.Jb.row(2) = t_zeta;
  out.detJb = pos.dot(t_eta.cross(t_zeta));
  if (out.detJb <= 0.0) {
    std::ostringstream os;
    os << "non-positive boundary Jacobian (detJb = " << out.detJb << ") on face "
       << face.face_id << "; face winding is not outward";
    throw ValidationError(os.str());
  }
  out.b1 = t_eta.cross(t_zeta) / out.detJb;
  out.b2 = t_zeta.cross(pos) / out.detJb;
  out.b3 = pos.cross(t_eta) / out.detJb;
  return out;
}

FaceCoefficients face_coefficients(const ElementFaceContext& face, const Material& mat) {
  const int n = face.poly.size();
  FaceCoefficients fc;
  fc.E0 = MatrixXd::Zero(n, n);
  fc.E1 = MatrixXd::Zero(n, n);
  fc.E2 = MatrixXd::Zero(n, n);
  fc.M0 = MatrixXd::Zero(n, n);

  for (size_t q = 0; q < face.rule.points.size(); ++q) {
    const Vec2& qp = face.rule.points[q];
    const double w = face.rule.weights[q];
    BasisEval basis = wachspress_eval(face.poly, qp);
    FaceGeometryAtPoint geo = face_geometry(face, qp);

    // B1 = b1 N, B2 = b2 N,eta + b3 N,zeta  (3 x n)
    Eigen::Matrix3Xd B1 = geo.b1 * basis.N.transpose();
    Eigen::Matrix3Xd B2 =
        geo.b2 * basis.dN_deta.transpose() + geo.b3 * basis.dN_dzeta.transpose();

    const double s = w * geo.detJb;
    fc.E0 += s * B1.transpose() * mat.k * B1;
    fc.E1 += s * B2.transpose() * mat.k * B1;
    fc.E2 += s * B2.transpose() * mat.k * B2;
    fc.M0 += (s * mat.Ss) * basis.N * basis.N.transpose();
  }
  return fc;
}

ElementCoefficients assemble_element_coeffs(const ElementGeometry& geom, const Material& mat) {
  const int n = int(geom.nodes.size());
  ElementCoefficients c;
  c.E0 = MatrixXd::Zero(n, n);
  c.E1 = MatrixXd::Zero(n, n);
  c.E2 = MatrixXd::Zero(n, n);
  c.M0 = MatrixXd::Zero(n, n);

  for (const auto& face : geom.faces) {
    FaceCoefficients fc = face_coefficients(face, mat);
    const int nf = face.poly.size();
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < nf; ++j) {
        const int gi = face.local_nodes[i], gj = face.local_nodes[j];
        c.E0(gi, gj) += fc.E0(i, j);
        c.E1(gi, gj) += fc.E1(i, j);
        c.E2(gi, gj) += fc.E2(i, j);
        c.M0(gi, gj) += fc.M0(i, j);
      }
  }
  return c;
}

HamiltonianSystem build_hamiltonian(const ElementCoefficients& coeffs) {
  const int n = int(coeffs.E0.rows());

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (coeffs.E0 + coeffs.E0.transpose()));
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0)
    throw NumericalError("E0 is not positive definite (min eigenvalue " + std::to_string(lo) +
                         "); check face orientation");
  if (hi / lo > 1e12)
    throw NumericalError("E0 condition number " + std::to_string(hi / lo) +
                         " exceeds 1e12; element too distorted");

  const MatrixXd E0inv = coeffs.E0.ldlt().solve(MatrixXd::Identity(n, n));
  const MatrixXd I = MatrixXd::Identity(n, n);

  HamiltonianSystem h;
  h.Zp.resize(2 * n, 2 * n);
  h.Zp.topLeftCorner(n, n) = -E0inv * coeffs.E1.transpose() + 0.5 * I;
  h.Zp.topRightCorner(n, n) = E0inv;
  h.Zp.bottomLeftCorner(n, n) = coeffs.E2 - coeffs.E1 * E0inv * coeffs.E1.transpose();
  h.Zp.bottomRightCorner(n, n) = coeffs.E1 * E0inv - 0.5 * I;
  return h;
}

ModalBasis eigen_split(const HamiltonianSystem& ham, const std::string& context) {
  const int n2 = int(ham.Zp.rows());
  const int n = n2 / 2;

  // QR iteration can stall on highly degenerate spectra (symmetric elements).
  // Retrying under an exact diagonal similarity D Zp D^-1 preserves the
  // eigenvalues and reliably changes the iteration path; eigenvectors are
  // mapped back through D^-1.
  VectorXcd ev;
  MatrixXcd V;
  std::mt19937 rng(0x5b7e11u);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  for (int attempt = 0;; ++attempt) {
    VectorXd d = VectorXd::Ones(n2);
    if (attempt > 0)
      for (int i = 0; i < n2; ++i) d[i] = dist(rng);
    const MatrixXd Zs = d.asDiagonal() * ham.Zp * d.cwiseInverse().asDiagonal();
    Eigen::EigenSolver<MatrixXd> es(Zs);
    if (es.info() == Eigen::Success) {
      ev = es.eigenvalues();
      V = d.cwiseInverse().asDiagonal() * es.eigenvectors();
      break;
    }
    if (attempt >= 4) throw NumericalError("eigen decomposition failed " + context);
  }

  // Bounded block: one member of each (lambda, -lambda) pair, positive real
  // part. Conjugate pairs are kept together by the sign of the real part.
  std::vector<int> sel;
  for (int i = 0; i < n2; ++i)
    if (ev[i].real() > 0.0) sel.push_back(i);
  if (int(sel.size()) != n) {
    std::ostringstream os;
    os << "modal selection found " << sel.size() << " eigenvalues with positive real part, "
       << "expected " << n << " " << context
       << "; spectrum may be degenerate (repeated or imaginary-axis eigenvalues)";
    throw NumericalError(os.str());
  }
  // Deterministic order: ascending real part, then ascending imaginary part.
  std::sort(sel.begin(), sel.end(), [&](int a, int b) {
    if (ev[a].real() != ev[b].real()) return ev[a].real() < ev[b].real();
    return ev[a].imag() < ev[b].imag();
  });

  ModalBasis mb;
  mb.Phi_h1.resize(n, n);
  mb.Phi_q1.resize(n, n);
  mb.lambda.resize(n);
  for (int j = 0; j < n; ++j) {
    mb.lambda[j] = ev[sel[j]];
    mb.Phi_h1.col(j) = V.col(sel[j]).head(n);
    mb.Phi_q1.col(j) = V.col(sel[j]).tail(n);
  }

  Eigen::JacobiSVD<MatrixXcd> svd(mb.Phi_h1);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  mb.cond_Phi_h1 = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(smin > 0.0) || mb.cond_Phi_h1 > 1e12)
    throw NumericalError("modal head matrix Phi_h1 is singular or near-singular (cond " +
                         std::to_string(mb.cond_Phi_h1) + ") " + context +
                         "; Zp may be defective");
  return mb;
}

Eigen::MatrixXd element_stiffness(const ModalBasis& mb, const std::string& context) {
  const int n = int(mb.Phi_h1.rows());
  const MatrixXcd Kc =
      mb.Phi_q1 * mb.Phi_h1.partialPivLu().solve(MatrixXcd::Identity(n, n));
  const double norm = Kc.norm();
  const double imag_norm = Kc.imag().norm();
  if (imag_norm > 1e-9 * std::max(norm, 1e-300))
    throw NumericalError("stiffness has imaginary residue " + std::to_string(imag_norm / norm) +
                         " relative " + context + "; wrong eigen-block selection");
  MatrixXd K = Kc.real();
  // Degenerate spectra (symmetric elements, e.g. perfect cubes) give harmless
  // asymmetry jitter up to ~1e-6; a wrong eigen-block produces O(1) asymmetry,
  // which this still catches. The returned K is exactly symmetric.
  const double asym = (K - K.transpose()).norm();
  if (asym > 1e-4 * std::max(K.norm(), 1e-300)) {
    std::ostringstream os;
    os << "stiffness asymmetry " << asym / K.norm() << " relative exceeds 1e-4 " << context;
    throw NumericalError(os.str());
  }
  return 0.5 * (K + K.transpose());
}

Eigen::MatrixXd element_mass(const ModalBasis& mb, const Eigen::MatrixXd& M0,
                             const std::string& context) {
  const int n = int(mb.Phi_h1.rows());
  const MatrixXcd m0 = mb.Phi_h1.transpose() * M0 * mb.Phi_h1;

  MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx den = mb.lambda[i] + mb.lambda[j] + 2.0;
      if (std::abs(den) < 1e-8)
        throw NumericalError("near-zero mass denominator for eigenvalue pair (" +
                             std::to_string(i) + "," + std::to_string(j) + ") " + context);
      m(i, j) = m0(i, j) / den;
    }

  const MatrixXcd Hinv = mb.Phi_h1.partialPivLu().solve(MatrixXcd::Identity(n, n));
  const MatrixXcd Mc = Hinv.transpose() * m * Hinv;
  const double norm = Mc.norm();
  if (norm > 0 && Mc.imag().norm() > 1e-8 * norm)
    throw NumericalError("mass matrix has imaginary residue " + context);
  MatrixXd M = Mc.real();
  return 0.5 * (M + M.transpose());
}

ElementOperators compute_element_operators(const Mesh& mesh, int elem, const Material& mat,
                                           int gauss_order, int subdivisions) {
  const std::string ctx = "(element " + std::to_string(elem) + ")";
  ElementGeometry geom = ElementGeometry::build(mesh, elem, gauss_order, subdivisions);
  ElementCoefficients coeffs = assemble_element_coeffs(geom, mat);
  ModalBasis mb = eigen_split(build_hamiltonian(coeffs), ctx);

  ElementOperators ops;
  ops.K = element_stiffness(mb, ctx);
  ops.M = mat.Ss > 0.0 ? element_mass(mb, coeffs.M0, ctx)
                       : MatrixXd::Zero(ops.K.rows(), ops.K.cols());
  ops.nodes = geom.nodes;
  return ops;
}

Eigen::VectorXcd integration_constants(const ModalBasis& mb, const Eigen::VectorXd& heads) {
  return mb.Phi_h1.partialPivLu().solve(heads.cast<cplx>());
}

Eigen::VectorXd radial_heads(const ModalBasis& mb, const Eigen::VectorXcd& c, double xi) {
  if (!(xi > 0.0) || xi > 1.0)
    throw Error("radial coordinate xi = " + std::to_string(xi) + " outside (0, 1]");
  const int n = int(mb.lambda.size());
  VectorXcd scaled(n);
  for (int i = 0; i < n; ++i)
    scaled[i] = std::pow(cplx(xi, 0.0), mb.lambda[i] - 0.5) * c[i];
  return (mb.Phi_h1 * scaled).real();
}

double internal_field(const ModalBasis& mb, const Eigen::VectorXcd& c,
                      const ElementFaceContext& face, double xi, const Vec2& qp) {
  const VectorXd h = radial_heads(mb, c, xi);
  BasisEval basis = wachspress_eval(face.poly, qp);
  double value = 0.0;
  for (int i = 0; i < face.poly.size(); ++i) value += basis.N[i] * h[face.local_nodes[i]];
  return value;
}

bool element_contains(const ElementGeometry& geom, const Vec3& p, double tol) {
  const Vec3 d = p - geom.centre;
  for (const auto& face : geom.faces) {
    const Vec3& n = face.poly.normal;
    const double dist = (face.poly.origin).dot(n);  // plane offset from centre
    if (d.dot(n) > dist + tol * std::max(1.0, std::abs(dist))) return false;
  }
  return true;
}

std::optional<RadialSample> locate_radial(const ElementGeometry& geom, const Vec3& p) {
  Vec3 d = p - geom.centre;
  const double r = d.norm();
  if (r < 1e-14) return std::nullopt;  // at the scaling centre; caller falls back

  for (size_t f = 0; f < geom.faces.size(); ++f) {
    const auto& face = geom.faces[f];
    const Vec3& n = face.poly.normal;
    const double dn = d.dot(n);
    if (dn <= 0.0) continue;
    const double plane = face.poly.origin.dot(n);
    const double t = plane / dn;  // ray parameter of the boundary hit
    if (t < 1.0 - 1e-9) continue; // p would be outside through this face
    const Vec2 q = face.poly.to_local(t * d);
    const double margin = 1e-10 * std::sqrt(std::abs(face.poly.area()));
    if (!face.poly.contains(q, margin)) continue;
    RadialSample s;
    s.face_index = int(f);
    s.xi = std::min(1.0, 1.0 / t);
    s.qp = q;
    return s;
  }
  return std::nullopt;
}

} // namespace psbfem
