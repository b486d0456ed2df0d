#include "psbfem/verification.hpp"

#include "psbfem/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace psbfem {

TetMesh make_box_tet_grid(const Box& domain, std::array<int, 3> div) {
  for (int d : div)
    if (d < 1) throw Error("tet grid divisions must be >= 1");
  const int nx = div[0] + 1, ny = div[1] + 1, nz = div[2] + 1;
  auto nid = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };

  TetMesh tm;
  tm.nodes.reserve(size_t(nx) * ny * nz);
  const Vec3 e = domain.extent();
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        tm.nodes.push_back(domain.lo + Vec3(e.x() * i / div[0], e.y() * j / div[1],
                                            e.z() * k / div[2]));

  // Kuhn triangulation: one tet per permutation of the axis order, all sharing
  // the main diagonal of the cell.
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < div[2]; ++k)
    for (int j = 0; j < div[1]; ++j)
      for (int i = 0; i < div[0]; ++i)
        for (const auto& p : perms) {
          std::array<int, 4> t;
          int c[3] = {i, j, k};
          t[0] = nid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            t[s + 1] = nid(c[0], c[1], c[2]);
          }
          // Odd permutations trace the path with negative orientation.
          Mat3 D;
          for (int col = 0; col < 3; ++col) D.col(col) = tm.nodes[t[col + 1]] - tm.nodes[t[0]];
          if (D.determinant() < 0) std::swap(t[2], t[3]);
          tm.tets.push_back(t);
        }

  const double tol = 1e-9 * std::max({e.x(), e.y(), e.z()});
  auto set_for = [&](const char* name, int axis, double value) {
    auto& s = tm.node_sets[name];
    for (size_t n = 0; n < tm.nodes.size(); ++n)
      if (std::abs(tm.nodes[n][axis] - value) < tol) s.push_back(int(n));
  };
  set_for("xmin", 0, domain.lo.x());
  set_for("xmax", 0, domain.hi.x());
  set_for("ymin", 1, domain.lo.y());
  set_for("ymax", 1, domain.hi.y());
  set_for("zmin", 2, domain.lo.z());
  set_for("zmax", 2, domain.hi.z());
  return tm;
}

namespace {

// P1 gradients and volume of one tet.
void tet_gradients(const TetMesh& tm, const std::array<int, 4>& t, Eigen::Matrix<double, 3, 4>& G,
                   double& volume) {
  Mat3 D;
  for (int c = 0; c < 3; ++c) D.col(c) = tm.nodes[t[c + 1]] - tm.nodes[t[0]];
  const double det = D.determinant();
  if (det <= 0) throw ValidationError("non-positive tet Jacobian");
  volume = det / 6.0;
  Mat3 Dinv = D.inverse();
  for (int c = 0; c < 3; ++c) G.col(c + 1) = Dinv.row(c).transpose();
  G.col(0) = -(G.col(1) + G.col(2) + G.col(3));
}

} // namespace

Eigen::SparseMatrix<double> tet_fem_stiffness(const TetMesh& tm, const Mat3& k) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(tm.tets.size() * 16);
  for (const auto& t : tm.tets) {
    Eigen::Matrix<double, 3, 4> G;
    double vol;
    tet_gradients(tm, t, G, vol);
    Eigen::Matrix4d Ke = vol * G.transpose() * k * G;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trip.emplace_back(t[a], t[b], Ke(a, b));
  }
  Eigen::SparseMatrix<double> K(int(tm.nodes.size()), int(tm.nodes.size()));
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

Eigen::VectorXd tet_fem_solve(const TetMesh& tm, const Mat3& k,
                              const std::map<int, double>& fixed) {
  return solve_constrained(tet_fem_stiffness(tm, k),
                           Eigen::VectorXd::Zero(int(tm.nodes.size())), fixed);
}

double tet_interpolate(const TetMesh& tm, const Eigen::VectorXd& heads, const Vec3& p) {
  for (const auto& t : tm.tets) {
    Mat3 D;
    for (int c = 0; c < 3; ++c) D.col(c) = tm.nodes[t[c + 1]] - tm.nodes[t[0]];
    Vec3 b = D.inverse() * (p - tm.nodes[t[0]]);
    const double b0 = 1.0 - b.sum();
    const double tol = -1e-10;
    if (b0 >= tol && b.x() >= tol && b.y() >= tol && b.z() >= tol)
      return b0 * heads[t[0]] + b.x() * heads[t[1]] + b.y() * heads[t[2]] + b.z() * heads[t[3]];
  }
  throw Error("point lies outside the tetrahedral mesh");
}

Eigen::MatrixXd schur_stiffness_oracle(const ElementCoefficients& coeffs) {
  const HamiltonianSystem ham = build_hamiltonian(coeffs);
  const int n2 = int(ham.Zp.rows());
  const int n = n2 / 2;

  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(ham.Zp.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  Eigen::MatrixXcd T = schur.matrixT();
  Eigen::MatrixXcd U = schur.matrixU();

  // Bubble positive-real-part eigenvalues to the top by unitary swaps of
  // adjacent diagonal entries of T.
  auto want = [&](int i) { return T(i, i).real() > 0.0; };
  for (int target = 0; target < n; ++target) {
    int src = target;
    while (src < n2 && !want(src)) ++src;
    if (src == n2)
      throw NumericalError("Schur oracle: fewer than n positive-real-part eigenvalues");
    for (int k = src; k > target; --k) {
      // Swap T(k-1,k-1) and T(k,k): rotate against [T(k-1,k); T(k,k)-T(k-1,k-1)].
      const std::complex<double> x = T(k - 1, k);
      const std::complex<double> y = T(k, k) - T(k - 1, k - 1);
      Eigen::JacobiRotation<std::complex<double>> G;
      G.makeGivens(x, y);
      T.applyOnTheLeft(k - 1, k, G.adjoint());
      T.applyOnTheRight(k - 1, k, G);
      U.applyOnTheRight(k - 1, k, G);
      T(k, k - 1) = 0.0;  // exact upper-triangularity restored by construction
    }
  }

  Eigen::MatrixXcd Uh = U.topLeftCorner(n, n);
  Eigen::MatrixXcd Uq = U.bottomLeftCorner(n, n);
  Eigen::MatrixXcd Kc = Uq * Uh.partialPivLu().solve(Eigen::MatrixXcd::Identity(n, n));
  if (Kc.imag().norm() > 1e-8 * std::max(1.0, Kc.real().norm()))
    throw NumericalError("Schur oracle: significant imaginary residue in K");
  Eigen::MatrixXd K = Kc.real();
  return 0.5 * (K + K.transpose());
}

void gauss_legendre_01(int n, Eigen::VectorXd& points, Eigen::VectorXd& weights) {
  if (n < 1) throw Error("quadrature order must be >= 1");
  // Golub-Welsch: eigenvalues of the symmetric Jacobi matrix on [-1, 1].
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  points.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    points[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
    weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);  // x0.5 from the map, x2 total weight
  }
}

Eigen::MatrixXd radial_mass_oracle(const ModalBasis& mb, const Eigen::MatrixXd& M0,
                                   int n_radial) {
  if (n_radial < 8) throw Error("radial_mass_oracle needs n_radial >= 8");
  const int n = int(mb.lambda.size());

  Eigen::VectorXd xi, w;
  gauss_legendre_01(n_radial, xi, w);

  const Eigen::MatrixXcd m0 = mb.Phi_h1.transpose() * M0 * mb.Phi_h1;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (int q = 0; q < n_radial; ++q) {
    Eigen::VectorXcd d(n);
    for (int i = 0; i < n; ++i) d[i] = std::pow(std::complex<double>(xi[q]), mb.lambda[i] - 0.5);
    // Integrand diag(d)^T m0 diag(d) xi^2 (plain transpose, matching the
    // closed-form derivation).
    m += (w[q] * xi[q] * xi[q]) * (d.asDiagonal() * m0 * d.asDiagonal()).eval();
  }

  Eigen::MatrixXcd inv = mb.Phi_h1.partialPivLu().solve(Eigen::MatrixXcd::Identity(n, n));
  Eigen::MatrixXcd Mc = inv.transpose() * m * inv;
  if (Mc.imag().norm() > 1e-8 * std::max(1.0, Mc.real().norm()))
    throw NumericalError("radial mass oracle: significant imaginary residue");
  Eigen::MatrixXd M = Mc.real();
  return 0.5 * (M + M.transpose());
}

namespace {

Mesh unit_cube_mesh() {
  Mesh m;
  m.nodes = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
             {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  m.faces = {{{0, 3, 2, 1}}, {{4, 5, 6, 7}}, {{0, 1, 5, 4}},
             {{1, 2, 6, 5}}, {{2, 3, 7, 6}}, {{3, 0, 4, 7}}};
  m.elements = {{{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}}}};
  return m;
}

Mesh unit_tet_mesh() {
  Mesh m;
  m.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.faces = {{{0, 2, 1}}, {{0, 1, 3}}, {{1, 2, 3}}, {{0, 3, 2}}};
  m.elements = {{{{0, 1}, {1, 1}, {2, 1}, {3, 1}}}};
  return m;
}

// Square frustum, bottom half-width 1 at z=0, top half-width t at z=1. Side
// faces are planar because corresponding edges stay parallel.
Mesh frustum_mesh(double t) {
  Mesh m;
  m.nodes = {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0},
             {-t, -t, 1}, {t, -t, 1}, {t, t, 1}, {-t, t, 1}};
  m.faces = {{{0, 3, 2, 1}}, {{4, 5, 6, 7}}, {{0, 1, 5, 4}},
             {{1, 2, 6, 5}}, {{2, 3, 7, 6}}, {{3, 0, 4, 7}}};
  m.elements = {{{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}}}};
  return m;
}

Mesh octahedron_mesh() {
  Mesh m;
  m.nodes = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  // 8 triangles, outward winding.
  m.faces = {{{0, 2, 4}}, {{2, 1, 4}}, {{1, 3, 4}}, {{3, 0, 4}},
             {{2, 0, 5}}, {{1, 2, 5}}, {{3, 1, 5}}, {{0, 3, 5}}};
  m.elements = {{{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}, {7, 1}}}};
  return m;
}

Mat3 random_rotation(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis;
  do {
    axis = Vec3(u(rng), u(rng), u(rng));
  } while (axis.norm() < 1e-3);
  const double angle = std::numbers::pi * u(rng);
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

} // namespace

Mesh random_element(std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  std::uniform_real_distribution<double> shift(-3.0, 3.0);
  std::uniform_int_distribution<int> pick(0, 3);

  Mesh m;
  switch (pick(rng)) {
    case 0: m = unit_cube_mesh(); break;
    case 1: m = unit_tet_mesh(); break;
    case 2: {
      std::uniform_real_distribution<double> top(0.3, 0.9);
      m = frustum_mesh(top(rng));
      break;
    }
    default: m = octahedron_mesh(); break;
  }

  // Invertible affine map: rotation * anisotropic scale * rotation + shift.
  // Planarity and star-convexity survive any such map.
  Mat3 A = random_rotation(rng) *
           Vec3(scale(rng), scale(rng), scale(rng)).asDiagonal().toDenseMatrix() *
           random_rotation(rng);
  if (A.determinant() < 0) A.col(0) *= -1.0;
  const Vec3 b(shift(rng), shift(rng), shift(rng));
  for (auto& p : m.nodes) p = A * p + b;
  require_valid(m);
  return m;
}

std::vector<Mesh> element_corpus(int count, std::uint32_t seed) {
  std::vector<Mesh> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(random_element(seed + std::uint32_t(i)));
  return out;
}

} // namespace psbfem
