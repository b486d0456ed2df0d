#include "psbfem/mesh_gen.hpp"

#include <array>
#include <cmath>
#include <map>

namespace psbfem {

std::vector<int> select_nodes(const Mesh& mesh, const std::function<bool(const Vec3&)>& pred) {
  std::vector<int> out;
  for (size_t i = 0; i < mesh.nodes.size(); ++i)
    if (pred(mesh.nodes[i])) out.push_back(int(i));
  return out;
}

void add_node_set(Mesh& mesh, const std::string& name,
                  const std::function<bool(const Vec3&)>& pred) {
  mesh.node_sets[name] = select_nodes(mesh, pred);
}

// ---------------------------------------------------------------------------
// Octree box refinement on an integer lattice.
//
// Cell coordinates are kept in "finest units": each base cell spans 2^levels
// units per axis, so every leaf box has integer corners and dyadically
// aligned faces. Transition faces are resolved by keeping only minimal
// rectangles (no smaller cell side contained in them); coarse cells then
// reference the fine sub-faces covering their sides.
// ---------------------------------------------------------------------------

namespace {

struct IBox {
  std::array<long, 3> lo;
  long size = 0;
};

// key: axis, plane coordinate, u-lo, v-lo, size   (u,v cyclic from axis)
using RectKey = std::array<long, 5>;

RectKey make_key(int axis, long c, long ulo, long vlo, long s) {
  return {long(axis), c, ulo, vlo, s};
}

void leaf_boxes(const Box& domain, std::array<int, 3> div, const Box& refine, int levels,
                std::vector<IBox>& out) {
  const long unit = 1L << levels;
  const Vec3 ext = domain.extent();
  const Vec3 step{ext.x() / (div[0] * double(unit)), ext.y() / (div[1] * double(unit)),
                  ext.z() / (div[2] * double(unit))};

  auto phys = [&](const std::array<long, 3>& p) {
    return Vec3(domain.lo.x() + p[0] * step.x(), domain.lo.y() + p[1] * step.y(),
                domain.lo.z() + p[2] * step.z());
  };

  std::function<void(IBox, int)> recurse = [&](IBox b, int level) {
    bool split = false;
    if (level < levels) {
      Vec3 lo = phys(b.lo);
      Vec3 hi = phys({b.lo[0] + b.size, b.lo[1] + b.size, b.lo[2] + b.size});
      const double eps = 1e-12 * ext.norm();
      split = (lo.x() < refine.hi.x() - eps && hi.x() > refine.lo.x() + eps) &&
              (lo.y() < refine.hi.y() - eps && hi.y() > refine.lo.y() + eps) &&
              (lo.z() < refine.hi.z() - eps && hi.z() > refine.lo.z() + eps);
    }
    if (!split) {
      out.push_back(b);
      return;
    }
    const long h = b.size / 2;
    for (long k = 0; k < 2; ++k)
      for (long j = 0; j < 2; ++j)
        for (long i = 0; i < 2; ++i)
          recurse({{b.lo[0] + i * h, b.lo[1] + j * h, b.lo[2] + k * h}, h}, level + 1);
  };

  for (int k = 0; k < div[2]; ++k)
    for (int j = 0; j < div[1]; ++j)
      for (int i = 0; i < div[0]; ++i)
        recurse({{i * unit, j * unit, k * unit}, unit}, 0);
}

} // namespace

Mesh octree_refine_box(const Box& domain, std::array<int, 3> base_divisions,
                       const Box& refine_region, int levels) {
  if (levels < 0) throw Error("octree_refine_box: levels must be >= 0");
  for (int d : base_divisions)
    if (d < 1) throw Error("octree_refine_box: base divisions must be >= 1");
  if (!domain.contains(refine_region) && levels > 0)
    throw Error("octree_refine_box: refine_region must lie inside the domain");

  const long unit = 1L << levels;
  std::vector<IBox> leaves;
  leaf_boxes(domain, base_divisions, refine_region, levels, leaves);

  // All cell sides, grouped for minimality marking.
  std::map<RectKey, bool> covered;  // value: some smaller rect is contained
  auto side_rects = [&](const IBox& b) {
    std::array<std::pair<RectKey, int>, 6> sides;  // key + outward sign of +axis normal
    int idx = 0;
    for (int a = 0; a < 3; ++a) {
      const int u = (a + 1) % 3, v = (a + 2) % 3;
      sides[idx++] = {make_key(a, b.lo[a], b.lo[u], b.lo[v], b.size), -1};
      sides[idx++] = {make_key(a, b.lo[a] + b.size, b.lo[u], b.lo[v], b.size), +1};
    }
    return sides;
  };

  for (const auto& b : leaves)
    for (const auto& [key, sign] : side_rects(b)) {
      (void)sign;
      covered.emplace(key, false);
      // Mark every dyadic ancestor rectangle as covered by this one.
      for (long S = key[4] * 2; S <= unit; S *= 2) {
        RectKey anc = make_key(int(key[0]), key[1], (key[2] / S) * S, (key[3] / S) * S, S);
        auto it = covered.find(anc);
        if (it != covered.end()) it->second = true;
        else covered.emplace(anc, true);
      }
    }

  Mesh mesh;
  const Vec3 ext = domain.extent();
  const Vec3 step{ext.x() / (base_divisions[0] * double(unit)),
                  ext.y() / (base_divisions[1] * double(unit)),
                  ext.z() / (base_divisions[2] * double(unit))};

  std::map<std::array<long, 3>, int> node_ids;
  auto node_of = [&](std::array<long, 3> p) {
    auto it = node_ids.find(p);
    if (it != node_ids.end()) return it->second;
    int id = int(mesh.nodes.size());
    node_ids.emplace(p, id);
    mesh.nodes.emplace_back(domain.lo.x() + p[0] * step.x(), domain.lo.y() + p[1] * step.y(),
                            domain.lo.z() + p[2] * step.z());
    return id;
  };

  // Materialize minimal rectangles as faces, winding CCW about the +axis.
  std::map<RectKey, int> face_ids;
  auto face_of = [&](const RectKey& key) {
    auto it = face_ids.find(key);
    if (it != face_ids.end()) return it->second;
    const int a = int(key[0]);
    const int u = (a + 1) % 3, v = (a + 2) % 3;
    const long c = key[1], ulo = key[2], vlo = key[3], s = key[4];
    auto corner = [&](long du, long dv) {
      std::array<long, 3> p{};
      p[a] = c;
      p[u] = ulo + du;
      p[v] = vlo + dv;
      return node_of(p);
    };
    PolygonFace f;
    f.nodes = {corner(0, 0), corner(s, 0), corner(s, s), corner(0, s)};
    int id = int(mesh.faces.size());
    mesh.faces.push_back(std::move(f));
    face_ids.emplace(key, id);
    return id;
  };

  // Collect all minimal faces covering a cell side (recursively split
  // non-minimal rectangles into quadrants).
  std::function<void(const RectKey&, int, Polyhedron&)> collect =
      [&](const RectKey& key, int sign, Polyhedron& el) {
        auto it = covered.find(key);
        const bool is_face = (it != covered.end()) && !it->second;
        if (is_face) {
          el.faces.push_back({face_of(key), sign});
          return;
        }
        if (key[4] <= 1)
          throw Error("octree_refine_box: internal tiling inconsistency");
        const long h = key[4] / 2;
        for (long dv = 0; dv < 2; ++dv)
          for (long du = 0; du < 2; ++du)
            collect(make_key(int(key[0]), key[1], key[2] + du * h, key[3] + dv * h, h), sign,
                    el);
      };

  for (const auto& b : leaves) {
    Polyhedron el;
    for (const auto& [key, sign] : side_rects(b)) collect(key, sign, el);
    mesh.elements.push_back(std::move(el));
  }

  // Insert hanging vertices into face loops: a coarse face edge that carries
  // lattice nodes of finer neighbours keeps them as ordinary (collinear)
  // vertices, so every element closes against the fine sub-faces.
  {
    std::vector<std::array<long, 3>> coord(mesh.nodes.size());
    for (const auto& [p, id] : node_ids) coord[id] = p;
    for (auto& face : mesh.faces) {
      std::vector<int> loop;
      const int n = int(face.nodes.size());
      for (int i = 0; i < n; ++i) {
        const int a = face.nodes[i], b = face.nodes[(i + 1) % n];
        loop.push_back(a);
        int axis = -1;
        for (int d = 0; d < 3; ++d)
          if (coord[a][d] != coord[b][d]) axis = d;
        const long dir = coord[b][axis] > coord[a][axis] ? 1 : -1;
        std::array<long, 3> p = coord[a];
        for (long t = coord[a][axis] + dir; t != coord[b][axis]; t += dir) {
          p[axis] = t;
          auto it = node_ids.find(p);
          if (it != node_ids.end()) loop.push_back(it->second);
        }
      }
      face.nodes = std::move(loop);
    }
  }

  // Boundary node and face sets on the six domain planes.
  const double tol = 1e-9 * std::max({ext.x(), ext.y(), ext.z()});
  const std::array<std::string, 6> names{"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};
  for (int a = 0; a < 3; ++a) {
    for (int side = 0; side < 2; ++side) {
      const double plane = side == 0 ? domain.lo[a] : domain.hi[a];
      const std::string& name = names[2 * a + side];
      add_node_set(mesh, name, [&, a, plane](const Vec3& p) { return std::abs(p[a] - plane) < tol; });
      std::vector<int> fset;
      for (size_t f = 0; f < mesh.faces.size(); ++f) {
        bool on = true;
        for (int n : mesh.faces[f].nodes) on = on && std::abs(mesh.nodes[n][a] - plane) < tol;
        if (on) fset.push_back(int(f));
      }
      mesh.face_sets[name] = std::move(fset);
    }
  }
  return mesh;
}

Mesh make_box_grid(const Box& domain, std::array<int, 3> divisions) {
  // Degenerate refine region: nothing gets split.
  Box none{domain.lo, domain.lo};
  return octree_refine_box(domain, divisions, none, 0);
}

// ---------------------------------------------------------------------------
// Five-element patch
// ---------------------------------------------------------------------------

Mesh make_patch_mesh() {
  Mesh m;
  auto zmid = [](double x, double y) { return 2.0 + 0.08 * (x - 0.5) + 0.12 * (y - 0.5); };

  // Bottom corners, tilted interior 3x3 grid, top 3x3 grid.
  int b[4];
  b[0] = 0; m.nodes.emplace_back(0, 0, 0);
  b[1] = 1; m.nodes.emplace_back(1, 0, 0);
  b[2] = 2; m.nodes.emplace_back(1, 1, 0);
  b[3] = 3; m.nodes.emplace_back(0, 1, 0);
  int mi[3][3], ti[3][3];
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      double x = 0.5 * i, y = 0.5 * j;
      mi[i][j] = int(m.nodes.size());
      m.nodes.emplace_back(x, y, zmid(x, y));
    }
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      ti[i][j] = int(m.nodes.size());
      m.nodes.emplace_back(0.5 * i, 0.5 * j, 3.0);
    }

  auto add_face = [&](std::vector<int> loop) {
    m.faces.push_back({std::move(loop)});
    return int(m.faces.size()) - 1;
  };

  // Faces of the 9-face bottom polyhedron. Sides are stored outward; their
  // top edges carry the interface mid-edge node so the element closes
  // against the 2x2 sub-face split.
  int f_bot = add_face({b[0], b[1], b[2], b[3]});                            // normal +z
  int f_y0 = add_face({b[0], b[1], mi[2][0], mi[1][0], mi[0][0]});           // outward -y
  int f_x1 = add_face({b[1], b[2], mi[2][2], mi[2][1], mi[2][0]});           // outward +x
  int f_y1 = add_face({b[2], b[3], mi[0][2], mi[1][2], mi[2][2]});           // outward +y
  int f_x0 = add_face({b[3], b[0], mi[0][0], mi[0][1], mi[0][2]});           // outward -x
  int q[2][2];
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      q[i][j] = add_face({mi[i][j], mi[i + 1][j], mi[i + 1][j + 1], mi[i][j + 1]});  // ~+z

  Polyhedron bottom;
  bottom.faces = {{f_bot, -1}, {f_y0, +1}, {f_x1, +1}, {f_y1, +1}, {f_x0, +1},
                  {q[0][0], +1}, {q[1][0], +1}, {q[0][1], +1}, {q[1][1], +1}};
  m.elements.push_back(bottom);

  // Walls and tops of the four upper hexahedra.
  int wx[3][2], wy[2][3], tq[2][2];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      wx[i][j] = add_face({mi[i][j], mi[i][j + 1], ti[i][j + 1], ti[i][j]});  // normal +x
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      wy[i][j] = add_face({mi[i][j], mi[i + 1][j], ti[i + 1][j], ti[i][j]});  // normal -y
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      tq[i][j] = add_face({ti[i][j], ti[i + 1][j], ti[i + 1][j + 1], ti[i][j + 1]});  // +z

  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      Polyhedron cell;
      cell.faces = {{q[i][j], -1},     {tq[i][j], +1},   {wx[i][j], -1},
                    {wx[i + 1][j], +1}, {wy[i][j], +1},   {wy[i][j + 1], -1}};
      m.elements.push_back(cell);
    }

  m.node_sets["zmin"] = {b[0], b[1], b[2], b[3]};
  std::vector<int>& top = m.node_sets["zmax"];
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) top.push_back(ti[i][j]);
  return m;
}

// ---------------------------------------------------------------------------
// Trapezoidal prism dam
// ---------------------------------------------------------------------------

Mesh make_trapezoid_dam(double height, double crest_width, double slope_left,
                        double slope_right, double thickness,
                        std::array<int, 3> divisions) {
  const int nx = divisions[0], ny = divisions[1], nz = divisions[2];
  const double base_width = crest_width + (slope_left + slope_right) * height;
  auto xl = [&](double z) { return slope_left * z; };
  auto xr = [&](double z) { return base_width - slope_right * z; };

  Mesh m;
  auto nid = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  for (int k = 0; k <= nz; ++k) {
    double z = height * k / nz;
    for (int j = 0; j <= ny; ++j) {
      double y = thickness * j / ny;
      for (int i = 0; i <= nx; ++i) {
        double x = xl(z) + (xr(z) - xl(z)) * i / nx;
        m.nodes.emplace_back(x, y, z);
      }
    }
  }

  auto add_face = [&](std::vector<int> loop) {
    m.faces.push_back({std::move(loop)});
    return int(m.faces.size()) - 1;
  };

  // Shared structured faces: fx normal ~+x, fy normal -y, fz normal +z.
  std::vector<int> fx((nx + 1) * ny * nz), fy(nx * (ny + 1) * nz), fz(nx * ny * (nz + 1));
  auto fxi = [&](int i, int j, int k) { return (k * ny + j) * (nx + 1) + i; };
  auto fyi = [&](int i, int j, int k) { return (k * (ny + 1) + j) * nx + i; };
  auto fzi = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i)
        fx[fxi(i, j, k)] =
            add_face({nid(i, j, k), nid(i, j + 1, k), nid(i, j + 1, k + 1), nid(i, j, k + 1)});
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i)
        fy[fyi(i, j, k)] =
            add_face({nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j, k + 1), nid(i, j, k + 1)});
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        fz[fzi(i, j, k)] =
            add_face({nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k), nid(i, j + 1, k)});

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        Polyhedron cell;
        cell.faces = {{fx[fxi(i, j, k)], -1},     {fx[fxi(i + 1, j, k)], +1},
                      {fy[fyi(i, j, k)], +1},     {fy[fyi(i, j + 1, k)], -1},
                      {fz[fzi(i, j, k)], -1},     {fz[fzi(i, j, k + 1)], +1}};
        m.elements.push_back(cell);
      }

  std::vector<int>& up = m.node_sets["upstream"];
  std::vector<int>& down = m.node_sets["downstream"];
  std::vector<int>& base = m.node_sets["zmin"];
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j) {
      up.push_back(nid(0, j, k));
      down.push_back(nid(nx, j, k));
    }
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) base.push_back(nid(i, j, 0));
  return m;
}

} // namespace psbfem
