#pragma once

#include "psbfem/element.hpp"
#include "psbfem/mesh.hpp"

#include <Eigen/Sparse>

#include <map>
#include <optional>
#include <vector>

namespace psbfem {

/// Piecewise-linear time series; constant extrapolation beyond the table.
struct TimeSeries {
  std::vector<std::pair<double, double>> points;  // (time, value), ascending

  static TimeSeries constant(double v) { return {{{0.0, v}}}; }
  double eval(double t) const;
};

struct DirichletBC {
  std::string node_set;
  TimeSeries value;  // hydraulic head (m)
};

/// Prescribed normal flux on a face set; positive into the domain (m/s).
struct FluxBC {
  std::string face_set;
  double value = 0.0;
};

struct Monitor {
  std::string label;
  Vec3 point;
};

struct BoundarySpec {
  std::vector<DirichletBC> dirichlet;
  std::vector<FluxBC> flux;
  std::vector<Monitor> monitors;
};

struct AssemblyOptions {
  int gauss_order = 3;
  int threads = 1;
};

/// Assembled global operators (over all DOFs, constraints not yet applied).
struct GlobalSystem {
  Eigen::SparseMatrix<double> Kg;
  Eigen::SparseMatrix<double> Mg;
  int n_dofs = 0;
};

/// Scatter-add of per-element K and M. Element operators are computed in
/// parallel (worker count from opts) and merged in fixed element order, so
/// the result is bit-reproducible.
GlobalSystem assemble_global(const Mesh& mesh, const std::vector<Material>& materials,
                             const std::vector<int>& element_material,
                             const AssemblyOptions& opts = {});

struct SolveOptions {
  bool use_cg = false;       // diagonal-preconditioned CG instead of direct LDLT
  double rel_tol = 1e-10;
};

/// Dirichlet node -> head at time t. Throws on conflicting prescriptions.
std::map<int, double> resolve_dirichlet(const Mesh& mesh,
                                        const std::vector<DirichletBC>& bcs, double t);

/// Consistent nodal loads from prescribed-flux face sets.
Eigen::VectorXd flux_loads(const Mesh& mesh, const std::vector<FluxBC>& bcs);

/// Constrained symmetric solve by partition/reduction: fixed DOFs are
/// eliminated and imposed exactly.
Eigen::VectorXd solve_constrained(const Eigen::SparseMatrix<double>& A,
                                  const Eigen::VectorXd& rhs,
                                  const std::map<int, double>& fixed,
                                  const SolveOptions& opts = {});

struct FieldResult {
  Eigen::VectorXd heads;                           // nodal heads at final time
  std::vector<double> times;                       // recorded output times
  std::vector<std::vector<double>> monitor_history;  // [monitor][time index]
  std::vector<Vec3> element_flux;                  // Darcy flux at centroids, final time
  Eigen::VectorXd reactions;                       // K h - f, meaningful at fixed nodes
  std::vector<int> dirichlet_nodes;
  double residual = 0.0;                           // ||K h - f|| / ||f|| on free DOFs
  bool max_principle_ok = true;
};

FieldResult solve_steady(const Mesh& mesh, const GlobalSystem& sys, const BoundarySpec& bc,
                         const std::vector<Material>& materials,
                         const std::vector<int>& element_material,
                         const SolveOptions& opts = {});

/// One backward-difference step: (Kg + Mg/dt) h_next = Q(t_next) + (Mg/dt) h_t.
Eigen::VectorXd step_transient(const Mesh& mesh, const GlobalSystem& sys,
                               const BoundarySpec& bc, const Eigen::VectorXd& h_t,
                               double t_next, double dt, const SolveOptions& opts = {});

struct TransientConfig {
  double dt = 1.0;
  int n_steps = 1;
  int output_stride = 1;
  bool initial_steady = true;    // initial condition: steady solve at t = 0
  double initial_value = 0.0;    // used when initial_steady is false
};

FieldResult run_transient(const Mesh& mesh, const GlobalSystem& sys, const BoundarySpec& bc,
                          const TransientConfig& cfg, const std::vector<Material>& materials,
                          const std::vector<int>& element_material,
                          const SolveOptions& opts = {});

/// Monitor-point evaluation: exact nodal value if the point coincides with a
/// node, otherwise semi-analytical reconstruction along the radial ray of the
/// containing element, with an inverse-distance fallback.
class MonitorSampler {
public:
  MonitorSampler(const Mesh& mesh, const std::vector<Material>& materials,
                 const std::vector<int>& element_material, const std::vector<Monitor>& monitors);

  double sample(int monitor, const Eigen::VectorXd& heads) const;
  bool used_fallback(int monitor) const { return entries_[monitor].mode == Mode::kFallback; }

private:
  enum class Mode { kNode, kRadial, kFallback };
  struct Entry {
    Mode mode = Mode::kFallback;
    int node = -1;
    ElementGeometry geom;
    ModalBasis mb;
    RadialSample sample;
    std::vector<int> idw_nodes;
    std::vector<double> idw_weights;
  };
  const Mesh& mesh_;
  std::vector<Entry> entries_;
};

/// Least-squares linear fit of nodal heads over one element; used for the
/// centroid Darcy flux output.
Vec3 element_centroid_flux(const Mesh& mesh, int elem, const Material& mat,
                           const Eigen::VectorXd& heads);

} // namespace psbfem
