#include "psbfem/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace psbfem {

using Eigen::SparseMatrix;
using Eigen::VectorXd;

double TimeSeries::eval(double t) const {
  if (points.empty()) throw Error("empty time series");
  if (t <= points.front().first) return points.front().second;
  if (t >= points.back().first) return points.back().second;
  for (size_t i = 1; i < points.size(); ++i)
    if (t <= points[i].first) {
      const auto& [t0, v0] = points[i - 1];
      const auto& [t1, v1] = points[i];
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  return points.back().second;
}

GlobalSystem assemble_global(const Mesh& mesh, const std::vector<Material>& materials,
                             const std::vector<int>& element_material,
                             const AssemblyOptions& opts) {
  const int ne = int(mesh.elements.size());
  if (int(element_material.size()) != ne)
    throw Error("element_material size mismatch");

  std::vector<ElementOperators> ops(ne);
  const int workers = std::max(1, opts.threads);
  if (workers == 1) {
    for (int e = 0; e < ne; ++e)
      ops[e] = compute_element_operators(mesh, e, materials.at(element_material[e]),
                                         opts.gauss_order);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::string first_error;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int e = next.fetch_add(1); e < ne; e = next.fetch_add(1)) {
          try {
            ops[e] = compute_element_operators(mesh, e, materials.at(element_material[e]),
                                               opts.gauss_order);
          } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(err_mutex);
            if (first_error.empty()) first_error = ex.what();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw NumericalError(first_error);
  }

  // Deterministic merge: fixed element order regardless of worker timing.
  const int nn = int(mesh.nodes.size());
  std::vector<Eigen::Triplet<double>> kt, mt;
  for (int e = 0; e < ne; ++e) {
    const auto& op = ops[e];
    const int n = int(op.nodes.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        kt.emplace_back(op.nodes[i], op.nodes[j], op.K(i, j));
        if (op.M.size() > 0 && op.M(i, j) != 0.0)
          mt.emplace_back(op.nodes[i], op.nodes[j], op.M(i, j));
      }
  }

  GlobalSystem sys;
  sys.n_dofs = nn;
  sys.Kg.resize(nn, nn);
  sys.Kg.setFromTriplets(kt.begin(), kt.end());
  sys.Mg.resize(nn, nn);
  sys.Mg.setFromTriplets(mt.begin(), mt.end());
  return sys;
}

std::map<int, double> resolve_dirichlet(const Mesh& mesh,
                                        const std::vector<DirichletBC>& bcs, double t) {
  std::map<int, double> fixed;
  for (const auto& bc : bcs) {
    const double v = bc.value.eval(t);
    for (int n : mesh.node_set(bc.node_set)) {
      auto [it, inserted] = fixed.emplace(n, v);
      if (!inserted && std::abs(it->second - v) > 1e-12 * (1.0 + std::abs(v)))
        throw Error("conflicting Dirichlet values at node " + std::to_string(n));
    }
  }
  return fixed;
}

Eigen::VectorXd flux_loads(const Mesh& mesh, const std::vector<FluxBC>& bcs) {
  VectorXd f = VectorXd::Zero(int(mesh.nodes.size()));
  for (const auto& bc : bcs) {
    if (bc.value == 0.0) continue;
    for (int face : mesh.face_set(bc.face_set)) {
      const auto& loop = mesh.faces[face].nodes;
      std::vector<Vec3> pts(loop.size());
      for (size_t i = 0; i < loop.size(); ++i) pts[i] = mesh.nodes[loop[i]];
      LocalPolygon full = make_local_polygon(pts);
      for (const auto& piece : convex_pieces(full)) {
        LocalPolygon poly;
        for (int v : piece) poly.vertices.push_back(full.vertices[v]);
        QuadratureRule rule = triangulate_and_quadrature(poly, 3);
        for (size_t q = 0; q < rule.points.size(); ++q) {
          BasisEval basis = wachspress_eval(poly, rule.points[q]);
          for (size_t i = 0; i < piece.size(); ++i)
            f[loop[piece[i]]] += bc.value * rule.weights[q] * basis.N[int(i)];
        }
      }
    }
  }
  return f;
}

Eigen::VectorXd solve_constrained(const SparseMatrix<double>& A, const VectorXd& rhs,
                                  const std::map<int, double>& fixed,
                                  const SolveOptions& opts) {
  const int n = int(A.rows());
  if (fixed.empty()) throw Error("singular system: no Dirichlet constraints");

  std::vector<int> to_free(n, -1);
  std::vector<int> free_idx;
  free_idx.reserve(n);
  for (int i = 0; i < n; ++i)
    if (!fixed.count(i)) {
      to_free[i] = int(free_idx.size());
      free_idx.push_back(i);
    }
  const int nf = int(free_idx.size());

  VectorXd h = VectorXd::Zero(n);
  for (const auto& [i, v] : fixed) h[i] = v;
  if (nf == 0) return h;

  // Reduced matrix and right-hand side: A_ff x = rhs_f - A_fc h_c.
  std::vector<Eigen::Triplet<double>> trip;
  VectorXd b(nf);
  for (int i = 0; i < nf; ++i) b[i] = rhs[free_idx[i]];
  for (int col = 0; col < n; ++col)
    for (SparseMatrix<double>::InnerIterator it(A, col); it; ++it) {
      const int r = int(it.row());
      if (to_free[r] < 0) continue;
      if (to_free[col] >= 0)
        trip.emplace_back(to_free[r], to_free[col], it.value());
      else
        b[to_free[r]] -= it.value() * h[col];
    }
  SparseMatrix<double> Aff(nf, nf);
  Aff.setFromTriplets(trip.begin(), trip.end());

  VectorXd x;
  if (opts.use_cg) {
    Eigen::ConjugateGradient<SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(opts.rel_tol);
    cg.setMaxIterations(20 * nf);
    cg.compute(Aff);
    x = cg.solve(b);
    if (cg.info() != Eigen::Success)
      throw NumericalError("CG failed to converge (residual " +
                           std::to_string(cg.error()) + ")");
  } else {
    Eigen::SimplicialLDLT<SparseMatrix<double>> ldlt(Aff);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("sparse factorization failed (singular or indefinite system)");
    x = ldlt.solve(b);
  }

  const double bn = b.norm();
  const double res = (Aff * x - b).norm();
  if (bn > 0 && res > 1e-8 * bn)
    throw NumericalError("linear solve residual " + std::to_string(res / bn) +
                         " exceeds tolerance");

  for (int i = 0; i < nf; ++i) h[free_idx[i]] = x[i];
  return h;
}

namespace {

double free_residual(const SparseMatrix<double>& A, const VectorXd& h, const VectorXd& f,
                     const std::map<int, double>& fixed) {
  VectorXd r = A * h - f;
  // Backward-error style normalization: || |A| |h| || on the free equations.
  // Normalizing by ||f|| is meaningless here because the free-node loads are
  // zero in every Dirichlet-driven case.
  VectorXd absacc = VectorXd::Zero(r.size());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      absacc[it.row()] += std::abs(it.value()) * std::abs(h[it.col()]);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < int(r.size()); ++i)
    if (!fixed.count(i)) {
      num += r[i] * r[i];
      den += absacc[i] * absacc[i] + f[i] * f[i];
    }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

bool check_max_principle(const VectorXd& h, const std::map<int, double>& fixed) {
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (const auto& [i, v] : fixed) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double slack = 1e-9 * std::max(1.0, hi - lo);
  for (int i = 0; i < int(h.size()); ++i)
    if (h[i] < lo - slack || h[i] > hi + slack) return false;
  return true;
}

void finalize_result(FieldResult& res, const Mesh& mesh, const GlobalSystem& sys,
                     const VectorXd& f, const std::map<int, double>& fixed,
                     const std::vector<Material>& materials,
                     const std::vector<int>& element_material) {
  res.reactions = sys.Kg * res.heads - f;
  res.dirichlet_nodes.clear();
  for (const auto& [i, v] : fixed) res.dirichlet_nodes.push_back(i);
  res.element_flux.resize(mesh.elements.size());
  for (size_t e = 0; e < mesh.elements.size(); ++e)
    res.element_flux[e] =
        element_centroid_flux(mesh, int(e), materials.at(element_material[e]), res.heads);
}

} // namespace

FieldResult solve_steady(const Mesh& mesh, const GlobalSystem& sys, const BoundarySpec& bc,
                         const std::vector<Material>& materials,
                         const std::vector<int>& element_material, const SolveOptions& opts) {
  const auto fixed = resolve_dirichlet(mesh, bc.dirichlet, 0.0);
  const VectorXd f = flux_loads(mesh, bc.flux);

  FieldResult res;
  res.heads = solve_constrained(sys.Kg, f, fixed, opts);
  res.residual = free_residual(sys.Kg, res.heads, f, fixed);
  res.max_principle_ok = bc.flux.empty() ? check_max_principle(res.heads, fixed) : true;
  res.times = {0.0};

  MonitorSampler sampler(mesh, materials, element_material, bc.monitors);
  res.monitor_history.resize(bc.monitors.size());
  for (size_t m = 0; m < bc.monitors.size(); ++m)
    res.monitor_history[m].push_back(sampler.sample(int(m), res.heads));

  finalize_result(res, mesh, sys, f, fixed, materials, element_material);
  return res;
}

Eigen::VectorXd step_transient(const Mesh& mesh, const GlobalSystem& sys,
                               const BoundarySpec& bc, const VectorXd& h_t, double t_next,
                               double dt, const SolveOptions& opts) {
  if (!(dt > 0.0)) throw Error("time step must be positive");
  if (h_t.size() != sys.n_dofs) throw Error("state vector size mismatch");

  const auto fixed = resolve_dirichlet(mesh, bc.dirichlet, t_next);
  SparseMatrix<double> A = sys.Kg + (1.0 / dt) * sys.Mg;
  VectorXd rhs = flux_loads(mesh, bc.flux) + (1.0 / dt) * (sys.Mg * h_t);
  return solve_constrained(A, rhs, fixed, opts);
}

FieldResult run_transient(const Mesh& mesh, const GlobalSystem& sys, const BoundarySpec& bc,
                          const TransientConfig& cfg, const std::vector<Material>& materials,
                          const std::vector<int>& element_material, const SolveOptions& opts) {
  VectorXd h;
  if (cfg.initial_steady) {
    const auto fixed0 = resolve_dirichlet(mesh, bc.dirichlet, 0.0);
    h = solve_constrained(sys.Kg, flux_loads(mesh, bc.flux), fixed0, opts);
  } else {
    h = VectorXd::Constant(sys.n_dofs, cfg.initial_value);
  }

  MonitorSampler sampler(mesh, materials, element_material, bc.monitors);
  FieldResult res;
  res.monitor_history.resize(bc.monitors.size());
  auto record = [&](double t) {
    res.times.push_back(t);
    for (size_t m = 0; m < bc.monitors.size(); ++m)
      res.monitor_history[m].push_back(sampler.sample(int(m), h));
  };
  record(0.0);

  for (int step = 1; step <= cfg.n_steps; ++step) {
    const double t = step * cfg.dt;
    h = step_transient(mesh, sys, bc, h, t, cfg.dt, opts);
    if (step % std::max(1, cfg.output_stride) == 0 || step == cfg.n_steps) record(t);
  }

  res.heads = h;
  const auto fixed = resolve_dirichlet(mesh, bc.dirichlet, cfg.n_steps * cfg.dt);
  const VectorXd f = flux_loads(mesh, bc.flux);
  res.residual = 0.0;
  finalize_result(res, mesh, sys, f, fixed, materials, element_material);
  return res;
}

// ---------------------------------------------------------------------------
// Monitors and flux recovery
// ---------------------------------------------------------------------------

MonitorSampler::MonitorSampler(const Mesh& mesh, const std::vector<Material>& materials,
                               const std::vector<int>& element_material,
                               const std::vector<Monitor>& monitors)
    : mesh_(mesh) {
  const Box bb = mesh.nodes.empty() ? Box{} : mesh.bounding_box();
  const double node_tol = 1e-9 * std::max(1.0, bb.extent().norm());

  entries_.resize(monitors.size());
  for (size_t m = 0; m < monitors.size(); ++m) {
    const Vec3& p = monitors[m].point;
    Entry& e = entries_[m];

    // Exact node hit.
    for (size_t n = 0; n < mesh.nodes.size(); ++n)
      if ((mesh.nodes[n] - p).norm() < node_tol) {
        e.mode = Mode::kNode;
        e.node = int(n);
        break;
      }
    if (e.mode == Mode::kNode) continue;

    int owner = -1;
    ElementGeometry geom;
    for (size_t el = 0; el < mesh.elements.size(); ++el) {
      ElementGeometry g = ElementGeometry::build(mesh, int(el));
      if (element_contains(g, p)) {
        owner = int(el);
        geom = std::move(g);
        break;
      }
    }
    if (owner < 0)
      throw Error("monitor '" + monitors[m].label + "' lies outside the mesh");

    auto sample = locate_radial(geom, p);
    if (sample) {
      try {
        ElementCoefficients coeffs =
            assemble_element_coeffs(geom, materials.at(element_material[owner]));
        e.mb = eigen_split(build_hamiltonian(coeffs));
        e.mode = Mode::kRadial;
        e.geom = std::move(geom);
        e.sample = *sample;
        continue;
      } catch (const NumericalError&) {
        // fall through to inverse-distance
      }
    }
    e.mode = Mode::kFallback;
    e.idw_nodes = geom.nodes;
    e.idw_weights.resize(geom.nodes.size());
    double wsum = 0.0;
    for (size_t i = 0; i < geom.nodes.size(); ++i) {
      double d = (mesh.nodes[geom.nodes[i]] - p).norm();
      e.idw_weights[i] = 1.0 / std::max(d, 1e-14);
      wsum += e.idw_weights[i];
    }
    for (auto& w : e.idw_weights) w /= wsum;
  }
}

double MonitorSampler::sample(int monitor, const Eigen::VectorXd& heads) const {
  const Entry& e = entries_.at(monitor);
  switch (e.mode) {
    case Mode::kNode:
      return heads[e.node];
    case Mode::kRadial: {
      VectorXd local(e.geom.nodes.size());
      for (size_t i = 0; i < e.geom.nodes.size(); ++i) local[int(i)] = heads[e.geom.nodes[i]];
      const auto c = integration_constants(e.mb, local);
      const double xi = std::max(e.sample.xi, 1e-6);
      return internal_field(e.mb, c, e.geom.faces[e.sample.face_index], xi, e.sample.qp);
    }
    case Mode::kFallback: {
      double v = 0.0;
      for (size_t i = 0; i < e.idw_nodes.size(); ++i)
        v += e.idw_weights[i] * heads[e.idw_nodes[i]];
      return v;
    }
  }
  return 0.0;
}

Vec3 element_centroid_flux(const Mesh& mesh, int elem, const Material& mat,
                           const Eigen::VectorXd& heads) {
  // Least-squares linear fit h ~ a + g.x over the element nodes.
  auto nodes = mesh.element_nodes(elem);
  const int n = int(nodes.size());
  Eigen::MatrixXd A(n, 4);
  VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const Vec3& p = mesh.nodes[nodes[i]];
    A.row(i) << 1.0, p.x(), p.y(), p.z();
    b[i] = heads[nodes[i]];
  }
  Eigen::Vector4d coef = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  Vec3 grad(coef[1], coef[2], coef[3]);
  return -mat.k * grad;
}

} // namespace psbfem
