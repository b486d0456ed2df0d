#include "psbfem/mesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace psbfem {

using nlohmann::json;

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& d : entries)
    os << d.kind << " (" << d.where << "): " << d.detail << "\n";
  return os.str();
}

std::vector<int> Mesh::oriented_face_nodes(const FaceRef& fr) const {
  std::vector<int> loop = faces.at(fr.face).nodes;
  if (fr.sign < 0) std::reverse(loop.begin(), loop.end());
  return loop;
}

std::vector<int> Mesh::element_nodes(int elem) const {
  std::vector<int> out;
  std::set<int> seen;
  for (const auto& fr : elements.at(elem).faces)
    for (int n : faces.at(fr.face).nodes)
      if (seen.insert(n).second) out.push_back(n);
  return out;
}

const std::vector<int>& Mesh::node_set(const std::string& name) const {
  auto it = node_sets.find(name);
  if (it == node_sets.end()) throw Error("unknown node set '" + name + "'");
  return it->second;
}

const std::vector<int>& Mesh::face_set(const std::string& name) const {
  auto it = face_sets.find(name);
  if (it == face_sets.end()) throw Error("unknown face set '" + name + "'");
  return it->second;
}

Vec3 Mesh::face_centroid(int face) const {
  // Area centroid via fan triangulation from the vertex mean.
  const auto& loop = faces.at(face).nodes;
  Vec3 mean = Vec3::Zero();
  for (int n : loop) mean += nodes[n];
  mean /= double(loop.size());
  Vec3 acc = Vec3::Zero();
  double area = 0.0;
  for (size_t i = 0; i < loop.size(); ++i) {
    const Vec3& a = nodes[loop[i]];
    const Vec3& b = nodes[loop[(i + 1) % loop.size()]];
    double tri = 0.5 * (a - mean).cross(b - mean).norm();
    acc += tri * (mean + a + b) / 3.0;
    area += tri;
  }
  if (area <= 0.0) return mean;
  return acc / area;
}

Vec3 Mesh::face_normal(int face) const {
  // Newell's method; robust for near-degenerate loops.
  const auto& loop = faces.at(face).nodes;
  Vec3 n = Vec3::Zero();
  for (size_t i = 0; i < loop.size(); ++i) {
    const Vec3& a = nodes[loop[i]];
    const Vec3& b = nodes[loop[(i + 1) % loop.size()]];
    n.x() += (a.y() - b.y()) * (a.z() + b.z());
    n.y() += (a.z() - b.z()) * (a.x() + b.x());
    n.z() += (a.x() - b.x()) * (a.y() + b.y());
  }
  double len = n.norm();
  if (len == 0.0) throw ValidationError("degenerate face " + std::to_string(face));
  return n / len;
}

double Mesh::face_area(int face) const {
  const auto& loop = faces.at(face).nodes;
  Vec3 acc = Vec3::Zero();
  const Vec3& o = nodes[loop[0]];
  for (size_t i = 1; i + 1 < loop.size(); ++i)
    acc += (nodes[loop[i]] - o).cross(nodes[loop[i + 1]] - o);
  return 0.5 * acc.norm();
}

double Mesh::face_diameter(int face) const {
  const auto& loop = faces.at(face).nodes;
  double d = 0.0;
  for (size_t i = 0; i < loop.size(); ++i)
    for (size_t j = i + 1; j < loop.size(); ++j)
      d = std::max(d, (nodes[loop[i]] - nodes[loop[j]]).norm());
  return d;
}

namespace {

// Signed volume of the pyramid from `apex` over an oriented face loop,
// fanned from the face centroid. Positive when the loop winds CCW as seen
// from outside and the apex is on the inner side.
double pyramid_volume(const Mesh& m, const std::vector<int>& loop, const Vec3& apex,
                      const Vec3& face_centroid) {
  double vol = 0.0;
  for (size_t i = 0; i < loop.size(); ++i) {
    const Vec3 a = m.nodes[loop[i]] - apex;
    const Vec3 b = m.nodes[loop[(i + 1) % loop.size()]] - apex;
    const Vec3 c = face_centroid - apex;
    vol += c.dot(a.cross(b)) / 6.0;
  }
  return vol;
}

} // namespace

double Mesh::element_volume(int elem) const {
  // Reference point = node mean; volumes are reference-independent for
  // closed boundaries.
  auto en = element_nodes(elem);
  Vec3 ref = Vec3::Zero();
  for (int n : en) ref += nodes[n];
  ref /= double(en.size());
  double vol = 0.0;
  for (const auto& fr : elements.at(elem).faces)
    vol += pyramid_volume(*this, oriented_face_nodes(fr), ref, face_centroid(fr.face));
  return vol;
}

Vec3 Mesh::scaling_centre(int elem) const {
  auto en = element_nodes(elem);
  Vec3 ref = Vec3::Zero();
  for (int n : en) ref += nodes[n];
  ref /= double(en.size());

  double vol = 0.0;
  Vec3 moment = Vec3::Zero();
  for (const auto& fr : elements.at(elem).faces) {
    auto loop = oriented_face_nodes(fr);
    const Vec3 fc = face_centroid(fr.face);
    for (size_t i = 0; i < loop.size(); ++i) {
      const Vec3 a = nodes[loop[i]] - ref;
      const Vec3 b = nodes[loop[(i + 1) % loop.size()]] - ref;
      const Vec3 c = fc - ref;
      double v = c.dot(a.cross(b)) / 6.0;
      vol += v;
      moment += v * (ref + (ref + a) + (ref + b) + (ref + c)) / 4.0;
    }
  }
  if (vol <= 0.0)
    throw ValidationError("degenerate element " + std::to_string(elem) +
                          ": non-positive volume " + std::to_string(vol));
  return moment / vol;
}

Box Mesh::bounding_box() const {
  Box b;
  b.lo = Vec3::Constant(std::numeric_limits<double>::max());
  b.hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (const auto& p : nodes) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void check_face_geometry(const Mesh& m, int f, ValidationReport& rep) {
  const auto& loop = m.faces[f].nodes;
  const std::string where = "face " + std::to_string(f);
  std::set<int> uniq(loop.begin(), loop.end());
  if (loop.size() < 3 || uniq.size() != loop.size()) {
    rep.entries.push_back({"degenerate", where, "fewer than 3 distinct nodes"});
    return;
  }
  Vec3 n;
  try {
    n = m.face_normal(f);
  } catch (const Error&) {
    rep.entries.push_back({"degenerate", where, "zero-area loop"});
    return;
  }

  // Planarity: max node distance from the best-fit plane through centroid.
  const Vec3 c = m.face_centroid(f);
  const double diam = m.face_diameter(f);
  double worst = 0.0;
  for (int v : loop) worst = std::max(worst, std::abs((m.nodes[v] - c).dot(n)));
  if (worst > kTolPlanar * diam) {
    rep.entries.push_back({"planarity", where,
                           "max out-of-plane distance " + std::to_string(worst) +
                               " exceeds tolerance"});
    return;
  }

  // Convexity: consecutive edge cross products must not oppose the face
  // normal. Collinear corners are allowed; hanging nodes on refined meshes
  // appear as ordinary vertices on a straight portion of the loop.
  for (size_t i = 0; i < loop.size(); ++i) {
    const Vec3& a = m.nodes[loop[i]];
    const Vec3& b = m.nodes[loop[(i + 1) % loop.size()]];
    const Vec3& d = m.nodes[loop[(i + 2) % loop.size()]];
    Vec3 cr = (b - a).cross(d - b);
    if (cr.dot(n) < -1e-12 * diam * diam) {
      rep.entries.push_back({"convexity", where,
                             "non-convex corner at loop position " +
                                 std::to_string((i + 1) % loop.size())});
      return;
    }
  }
}

void check_element(const Mesh& m, int e, ValidationReport& rep) {
  const auto& el = m.elements[e];
  const std::string where = "element " + std::to_string(e);
  if (el.faces.size() < 4) {
    rep.entries.push_back({"closedness", where, "fewer than 4 faces"});
    return;
  }

  // Closed 2-manifold: every directed edge appears exactly once, and its
  // reverse exactly once.
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& fr : el.faces) {
    auto loop = m.oriented_face_nodes(fr);
    for (size_t i = 0; i < loop.size(); ++i) {
      int a = loop[i], b = loop[(i + 1) % loop.size()];
      edge_count[{a, b}] += 1;
    }
  }
  for (const auto& [edge, cnt] : edge_count) {
    auto rev = edge_count.find({edge.second, edge.first});
    if (cnt != 1 || rev == edge_count.end() || rev->second != 1) {
      rep.entries.push_back({"closedness", where,
                             "edge (" + std::to_string(edge.first) + "," +
                                 std::to_string(edge.second) +
                                 ") not shared by exactly two faces with opposite traversal"});
      return;
    }
  }

  Vec3 centre;
  try {
    centre = m.scaling_centre(e);
  } catch (const Error& err) {
    rep.entries.push_back({"degenerate", where, err.what()});
    return;
  }

  // Outward normals and star-convexity w.r.t. the scaling centre.
  for (size_t k = 0; k < el.faces.size(); ++k) {
    const auto& fr = el.faces[k];
    Vec3 n = m.face_normal(fr.face) * double(fr.sign);
    const Vec3 fc = m.face_centroid(fr.face);
    double dist = (fc - centre).dot(n);
    if (dist <= 0.0) {
      rep.entries.push_back({"orientation", where,
                             "non-outward normal, element " + std::to_string(e) +
                                 ", face " + std::to_string(fr.face)});
      continue;
    }
    // Every face pyramid must have positive volume (all fan tetrahedra).
    auto loop = m.oriented_face_nodes(fr);
    for (size_t i = 0; i < loop.size(); ++i) {
      const Vec3 a = m.nodes[loop[i]] - centre;
      const Vec3 b = m.nodes[loop[(i + 1) % loop.size()]] - centre;
      if ((fc - centre).dot(a.cross(b)) <= 0.0) {
        rep.entries.push_back({"star-convexity", where,
                               "face " + std::to_string(fr.face) +
                                   " pyramid has a non-positive sector at loop position " +
                                   std::to_string(i)});
        break;
      }
    }
  }
}

} // namespace

ValidationReport validate_mesh(const Mesh& mesh) {
  ValidationReport rep;

  // Index ranges.
  const int nn = int(mesh.nodes.size());
  const int nf = int(mesh.faces.size());
  for (int f = 0; f < nf; ++f)
    for (int v : mesh.faces[f].nodes)
      if (v < 0 || v >= nn) {
        rep.entries.push_back({"index", "face " + std::to_string(f),
                               "node index " + std::to_string(v) + " out of range"});
        return rep;
      }
  std::vector<int> face_use(nf, 0);
  for (size_t e = 0; e < mesh.elements.size(); ++e)
    for (const auto& fr : mesh.elements[e].faces) {
      if (fr.face < 0 || fr.face >= nf) {
        rep.entries.push_back({"index", "element " + std::to_string(e),
                               "face index " + std::to_string(fr.face) + " out of range"});
        return rep;
      }
      face_use[fr.face] += 1;
    }
  for (int f = 0; f < nf; ++f)
    if (face_use[f] == 0)
      rep.entries.push_back({"orphan", "face " + std::to_string(f),
                             "face referenced by zero elements"});
  for (const auto& [name, set] : mesh.node_sets)
    for (int v : set)
      if (v < 0 || v >= nn)
        rep.entries.push_back({"index", "node_set " + name, "node index out of range"});
  for (const auto& [name, set] : mesh.face_sets)
    for (int v : set)
      if (v < 0 || v >= nf)
        rep.entries.push_back({"index", "face_set " + name, "face index out of range"});
  if (!rep.ok()) return rep;

  for (int f = 0; f < nf; ++f) check_face_geometry(mesh, f, rep);
  if (!rep.ok()) return rep;
  for (size_t e = 0; e < mesh.elements.size(); ++e) check_element(mesh, int(e), rep);
  return rep;
}

void require_valid(const Mesh& mesh) {
  auto rep = validate_mesh(mesh);
  if (!rep.ok())
    throw ValidationError("mesh validation failed:\n" + rep.to_string());
}

// ---------------------------------------------------------------------------
// JSON format
// ---------------------------------------------------------------------------

Mesh load_mesh_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed JSON in '" + path + "': " + e.what());
  }

  Mesh m;
  try {
    for (const auto& jn : j.at("nodes"))
      m.nodes.emplace_back(jn.at(0).get<double>(), jn.at(1).get<double>(),
                           jn.at(2).get<double>());
    for (const auto& jf : j.at("faces")) {
      PolygonFace f;
      for (const auto& v : jf) f.nodes.push_back(v.get<int>());
      m.faces.push_back(std::move(f));
    }
    for (const auto& je : j.at("elements")) {
      Polyhedron el;
      for (const auto& v : je) {
        int signed_ref = v.get<int>();
        if (signed_ref == 0) throw ParseError("face reference 0 is invalid (1-based signed)");
        el.faces.push_back({std::abs(signed_ref) - 1, signed_ref > 0 ? +1 : -1});
      }
      m.elements.push_back(std::move(el));
    }
    if (j.contains("node_sets"))
      for (auto& [name, arr] : j.at("node_sets").items())
        m.node_sets[name] = arr.get<std::vector<int>>();
    if (j.contains("face_sets"))
      for (auto& [name, arr] : j.at("face_sets").items())
        m.face_sets[name] = arr.get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ParseError("bad mesh schema in '" + path + "': " + e.what());
  }
  return m;
}

void save_mesh_json(const Mesh& mesh, const std::string& path) {
  json j;
  j["nodes"] = json::array();
  for (const auto& p : mesh.nodes) j["nodes"].push_back({p.x(), p.y(), p.z()});
  j["faces"] = json::array();
  for (const auto& f : mesh.faces) j["faces"].push_back(f.nodes);
  j["elements"] = json::array();
  for (const auto& e : mesh.elements) {
    json refs = json::array();
    for (const auto& fr : e.faces) refs.push_back(fr.sign * (fr.face + 1));
    j["elements"].push_back(refs);
  }
  j["node_sets"] = json::object();
  for (const auto& [name, set] : mesh.node_sets) j["node_sets"][name] = set;
  j["face_sets"] = json::object();
  for (const auto& [name, set] : mesh.face_sets) j["face_sets"][name] = set;

  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file '" + path + "'");
  out << j.dump(1) << "\n";
}

// ---------------------------------------------------------------------------
// ABAQUS-style .inp subset
//
// Grammar (keywords case-insensitive, comma-separated values, ** comments):
//   *NODE                     id, x, y, z
//   *FACE                     id, n, v1, ..., vn        (node ids)
//   *ELEMENT                  id, m, ±f1, ..., ±fm      (signed face ids)
//   *NSET, NSET=name          id, id, ...
//   *FSET, FSET=name          id, id, ...
// All ids are 1-based; element face references carry the orientation sign.
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(line);
  while (std::getline(is, item, ',')) {
    size_t b = item.find_first_not_of(" \t\r");
    size_t e = item.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

std::string upper(std::string s) {
  for (auto& c : s) c = char(std::toupper(unsigned(c)));
  return s;
}

} // namespace

Mesh load_mesh_inp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path + "'");

  Mesh m;
  std::map<int, int> node_id_map, face_id_map;
  std::string section, set_name, line;
  int lineno = 0;

  auto fail = [&](const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("**", 0) == 0) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '*') {
      auto parts = split_csv(line);
      std::string kw = upper(parts[0]);
      section = kw;
      set_name.clear();
      for (size_t i = 1; i < parts.size(); ++i) {
        auto eq = parts[i].find('=');
        if (eq != std::string::npos) {
          std::string key = upper(parts[i].substr(0, eq));
          if (key == "NSET" || key == "FSET") set_name = parts[i].substr(eq + 1);
        }
      }
      continue;
    }

    auto vals = split_csv(line);
    try {
      if (section == "*NODE") {
        if (vals.size() < 4) fail("expected: id, x, y, z");
        int id = std::stoi(vals[0]);
        node_id_map[id] = int(m.nodes.size());
        m.nodes.emplace_back(std::stod(vals[1]), std::stod(vals[2]), std::stod(vals[3]));
      } else if (section == "*FACE") {
        if (vals.size() < 2) fail("expected: id, n, v1..vn");
        int id = std::stoi(vals[0]);
        int n = std::stoi(vals[1]);
        if (int(vals.size()) != 2 + n) fail("face node count mismatch");
        PolygonFace f;
        for (int i = 0; i < n; ++i) {
          int nid = std::stoi(vals[2 + i]);
          auto it = node_id_map.find(nid);
          if (it == node_id_map.end()) fail("unknown node id " + std::to_string(nid));
          f.nodes.push_back(it->second);
        }
        face_id_map[id] = int(m.faces.size());
        m.faces.push_back(std::move(f));
      } else if (section == "*ELEMENT") {
        if (vals.size() < 2) fail("expected: id, m, ±f1..±fm");
        int nf = std::stoi(vals[1]);
        if (int(vals.size()) != 2 + nf) fail("element face count mismatch");
        Polyhedron el;
        for (int i = 0; i < nf; ++i) {
          int fid = std::stoi(vals[2 + i]);
          if (fid == 0) fail("face reference 0 is invalid");
          auto it = face_id_map.find(std::abs(fid));
          if (it == face_id_map.end()) fail("unknown face id " + std::to_string(std::abs(fid)));
          el.faces.push_back({it->second, fid > 0 ? +1 : -1});
        }
        m.elements.push_back(std::move(el));
      } else if (section == "*NSET") {
        if (set_name.empty()) fail("*NSET without NSET=name");
        for (const auto& v : vals) {
          if (v.empty()) continue;
          auto it = node_id_map.find(std::stoi(v));
          if (it == node_id_map.end()) fail("unknown node id " + v);
          m.node_sets[set_name].push_back(it->second);
        }
      } else if (section == "*FSET") {
        if (set_name.empty()) fail("*FSET without FSET=name");
        for (const auto& v : vals) {
          if (v.empty()) continue;
          auto it = face_id_map.find(std::stoi(v));
          if (it == face_id_map.end()) fail("unknown face id " + v);
          m.face_sets[set_name].push_back(it->second);
        }
      } else {
        fail("data line outside a recognized section");
      }
    } catch (const std::invalid_argument&) {
      fail("numeric parse failure");
    }
  }
  return m;
}

Mesh load_mesh(const std::string& path) {
  Mesh m;
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".inp")
    m = load_mesh_inp(path);
  else
    m = load_mesh_json(path);
  require_valid(m);
  return m;
}

} // namespace psbfem
