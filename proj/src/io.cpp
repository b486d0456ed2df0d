#include "psbfem/io.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace psbfem {

std::string format_sig12(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

namespace {

// VTK_HEXAHEDRON node order (bottom quad CCW seen from above, then the top
// partners) if the element is a plain hexahedron, otherwise nullopt.
std::optional<std::array<int, 8>> as_hexahedron(const Mesh& mesh, int elem) {
  const auto& el = mesh.elements[elem];
  if (el.faces.size() != 6) return std::nullopt;
  for (const auto& fr : el.faces)
    if (mesh.faces[fr.face].nodes.size() != 4) return std::nullopt;
  if (mesh.element_nodes(elem).size() != 8) return std::nullopt;

  // Bottom = face whose outward loop, reversed, is CCW from outside above it;
  // any face works as "bottom", orientation is what matters.
  std::vector<int> bottom = mesh.oriented_face_nodes(el.faces[0]);
  std::reverse(bottom.begin(), bottom.end());

  // Vertical partner of a bottom node: its unique edge neighbour off the
  // bottom face.
  std::set<int> in_bottom(bottom.begin(), bottom.end());
  std::array<int, 8> order{};
  for (int i = 0; i < 4; ++i) order[i] = bottom[i];
  for (int i = 0; i < 4; ++i) {
    int partner = -1;
    for (const auto& fr : el.faces) {
      const auto& loop = mesh.faces[fr.face].nodes;
      const int nf = int(loop.size());
      for (int a = 0; a < nf; ++a) {
        const int u = loop[a], v = loop[(a + 1) % nf];
        int other = -1;
        if (u == bottom[i] && !in_bottom.count(v)) other = v;
        if (v == bottom[i] && !in_bottom.count(u)) other = u;
        if (other >= 0) {
          if (partner >= 0 && partner != other) return std::nullopt;
          partner = other;
        }
      }
    }
    if (partner < 0) return std::nullopt;
    order[4 + i] = partner;
  }
  return order;
}

} // namespace

void export_vtk(const Mesh& mesh, const ExportFields& fields, const std::string& path) {
  for (const auto& [name, v] : fields.point_data)
    if (v.size() != int(mesh.nodes.size()))
      throw Error("point field '" + name + "' size mismatch");
  for (const auto& [name, v] : fields.cell_data)
    if (v.size() != int(mesh.elements.size()))
      throw Error("cell field '" + name + "' size mismatch");

  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.precision(12);

  out << "# vtk DataFile Version 3.0\n"
      << "polyhedral seepage fields\n"
      << "ASCII\n"
      << "DATASET UNSTRUCTURED_GRID\n"
      << "POINTS " << mesh.nodes.size() << " double\n";
  for (const auto& p : mesh.nodes) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';

  // Build cell integer streams first to know the section length.
  std::vector<std::vector<int>> streams;
  std::vector<int> types;
  for (size_t e = 0; e < mesh.elements.size(); ++e) {
    if (auto hex = as_hexahedron(mesh, int(e))) {
      streams.emplace_back(hex->begin(), hex->end());
      types.push_back(12);
      continue;
    }
    // Face stream: nFaces, then per face nPts followed by the point ids,
    // outward winding.
    std::vector<int> s;
    s.push_back(int(mesh.elements[e].faces.size()));
    for (const auto& fr : mesh.elements[e].faces) {
      auto loop = mesh.oriented_face_nodes(fr);
      s.push_back(int(loop.size()));
      s.insert(s.end(), loop.begin(), loop.end());
    }
    streams.push_back(std::move(s));
    types.push_back(42);
  }

  size_t total = 0;
  for (const auto& s : streams) total += s.size() + 1;
  out << "CELLS " << streams.size() << ' ' << total << '\n';
  for (const auto& s : streams) {
    out << s.size();
    for (int v : s) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << types.size() << '\n';
  for (int t : types) out << t << '\n';

  if (!fields.point_data.empty()) {
    out << "POINT_DATA " << mesh.nodes.size() << '\n';
    for (const auto& [name, v] : fields.point_data) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < v.size(); ++i) out << v[i] << '\n';
    }
  }
  if (!fields.cell_data.empty()) {
    out << "CELL_DATA " << mesh.elements.size() << '\n';
    for (const auto& [name, v] : fields.cell_data) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < v.size(); ++i) out << v[i] << '\n';
    }
  }
  if (!out) throw Error("write failure on '" + path + "'");
}

VtkGrid read_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  VtkGrid g;
  std::string tok;
  auto expect_int = [&] {
    long long v;
    if (!(in >> v)) throw ParseError("unexpected end of VTK file");
    return int(v);
  };
  std::optional<std::string> pending;
  auto next = [&](std::string& t) {
    if (pending) {
      t = *pending;
      pending.reset();
      return true;
    }
    return bool(in >> t);
  };
  while (next(tok)) {
    if (tok == "POINTS") {
      const int n = expect_int();
      in >> tok;  // data type
      g.points.resize(n);
      for (auto& p : g.points) in >> p.x() >> p.y() >> p.z();
    } else if (tok == "CELLS") {
      const int n = expect_int();
      expect_int();  // total ints, redundant
      g.cells.resize(n);
      for (auto& c : g.cells) {
        const int len = expect_int();
        c.resize(len);
        for (int& v : c) v = expect_int();
      }
    } else if (tok == "CELL_TYPES") {
      const int n = expect_int();
      g.cell_types.resize(n);
      for (int& t : g.cell_types) t = expect_int();
    } else if (tok == "POINT_DATA" || tok == "CELL_DATA") {
      const bool point = tok == "POINT_DATA";
      const int n = expect_int();
      while (in >> tok && tok == "SCALARS") {
        std::string name, dtype;
        in >> name >> dtype;
        int comps = 1;
        in >> comps;
        std::string lt, table;
        in >> lt >> table;  // LOOKUP_TABLE default
        auto& dst = point ? g.point_data[name] : g.cell_data[name];
        dst.resize(size_t(n) * comps);
        for (auto& v : dst) in >> v;
      }
      if (in && tok != "SCALARS") pending = tok;  // e.g. CELL_DATA after POINT_DATA
    }
  }
  return g;
}

void write_monitor_csv(const std::string& path, const std::vector<double>& times,
                       const std::vector<std::string>& labels,
                       const std::vector<std::vector<double>>& history) {
  if (labels.size() != history.size()) throw Error("monitor label/history count mismatch");
  for (const auto& h : history)
    if (h.size() != times.size()) throw Error("monitor history length mismatch");

  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "time";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (size_t t = 0; t < times.size(); ++t) {
    out << format_sig12(times[t]);
    for (const auto& h : history) out << ',' << format_sig12(h[t]);
    out << '\n';
  }
}

} // namespace psbfem
