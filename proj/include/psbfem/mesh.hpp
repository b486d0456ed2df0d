#pragma once

#include "psbfem/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace psbfem {

/// Planar convex polygon stored as an ordered node loop. The stored order is
/// counter-clockwise when viewed from the side the stored normal points to;
/// elements reference faces with a sign to recover the outward orientation.
struct PolygonFace {
  std::vector<int> nodes;
};

/// Signed face reference: sign = +1 uses the stored winding, -1 reverses it.
struct FaceRef {
  int face = 0;
  int sign = +1;
};

/// Polyhedral element described purely by its boundary faces.
struct Polyhedron {
  std::vector<FaceRef> faces;
};

/// One validation finding. `where` identifies the element/face involved.
struct Diagnostic {
  std::string kind;  // "planarity", "convexity", "orientation", "star-convexity", ...
  std::string where;
  std::string detail;
};

struct ValidationReport {
  std::vector<Diagnostic> entries;
  bool ok() const { return entries.empty(); }
  std::string to_string() const;
};

/// Polyhedral mesh: nodes, shared polygon faces, and face-referencing
/// elements, plus named index sets for boundary conditions. Immutable after
/// validation; all queries are const and safe to share across threads.
struct Mesh {
  std::vector<Vec3> nodes;
  std::vector<PolygonFace> faces;
  std::vector<Polyhedron> elements;
  std::map<std::string, std::vector<int>> node_sets;
  std::map<std::string, std::vector<int>> face_sets;

  /// Face node loop with the element's outward winding applied.
  std::vector<int> oriented_face_nodes(const FaceRef& fr) const;

  /// Unique nodes of an element in deterministic first-appearance order.
  std::vector<int> element_nodes(int elem) const;

  const std::vector<int>& node_set(const std::string& name) const;
  const std::vector<int>& face_set(const std::string& name) const;

  Vec3 face_centroid(int face) const;
  /// Unit normal of the stored winding (Newell's method).
  Vec3 face_normal(int face) const;
  double face_area(int face) const;
  double face_diameter(int face) const;

  /// Element volume by face-pyramid decomposition (fans from face centroids).
  double element_volume(int elem) const;
  /// Volume centroid of an element; the SBFEM scaling centre.
  Vec3 scaling_centre(int elem) const;

  Box bounding_box() const;
};

/// Relative tolerance for face planarity, scaled by the face diameter.
inline constexpr double kTolPlanar = 1e-8;

/// Full invariant check: planarity, convexity, closedness, outward
/// orientation, star-convexity. Returns findings instead of throwing.
ValidationReport validate_mesh(const Mesh& mesh);

/// Loads and validates a mesh. Supported formats are deduced from the file
/// extension: ".json" (native format) and ".inp" (ABAQUS-style subset).
Mesh load_mesh(const std::string& path);

Mesh load_mesh_json(const std::string& path);
Mesh load_mesh_inp(const std::string& path);
void save_mesh_json(const Mesh& mesh, const std::string& path);

/// Throws ValidationError on the first finding; convenience for loaders.
void require_valid(const Mesh& mesh);

} // namespace psbfem
