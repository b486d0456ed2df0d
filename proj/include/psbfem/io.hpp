#pragma once

#include "psbfem/mesh.hpp"

#include <map>
#include <string>
#include <vector>

namespace psbfem {

/// Named nodal and per-element scalar fields for export.
struct ExportFields {
  std::map<std::string, Eigen::VectorXd> point_data;  // sized to node count
  std::map<std::string, Eigen::VectorXd> cell_data;   // sized to element count
};

/// Legacy VTK unstructured grid. Elements that are plain hexahedra are written
/// as cell type 12, everything else as polyhedra (type 42, face-stream
/// encoding).
void export_vtk(const Mesh& mesh, const ExportFields& fields, const std::string& path);

/// Minimal reader for the writer's own output; round-trip test support.
struct VtkGrid {
  std::vector<Vec3> points;
  std::vector<std::vector<int>> cells;  // raw cell integer streams
  std::vector<int> cell_types;
  std::map<std::string, std::vector<double>> point_data;
  std::map<std::string, std::vector<double>> cell_data;
};

VtkGrid read_vtk(const std::string& path);

/// Monitor time histories as CSV: time column then one column per label.
/// Values use 12 significant digits for reproducible diffs.
void write_monitor_csv(const std::string& path, const std::vector<double>& times,
                       const std::vector<std::string>& labels,
                       const std::vector<std::vector<double>>& history);

std::string format_sig12(double v);

} // namespace psbfem
