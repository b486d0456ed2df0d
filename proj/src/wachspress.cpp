#include "psbfem/wachspress.hpp"

#include <cmath>

namespace psbfem {

Vec2 LocalPolygon::centroid() const {
  // Area centroid of the CCW polygon (shoelace moments).
  double a2 = 0.0;
  Vec2 c = Vec2::Zero();
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const Vec2& p = vertices[i];
    const Vec2& q = vertices[(i + 1) % n];
    double cr = p.x() * q.y() - q.x() * p.y();
    a2 += cr;
    c += cr * (p + q);
  }
  if (a2 == 0.0) throw NumericalError("degenerate polygon in centroid()");
  return c / (3.0 * a2);
}

double LocalPolygon::area() const {
  double a2 = 0.0;
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const Vec2& p = vertices[i];
    const Vec2& q = vertices[(i + 1) % n];
    a2 += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a2;
}

bool LocalPolygon::contains(const Vec2& p, double tol) const {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const Vec2 a = vertices[i];
    const Vec2 b = vertices[(i + 1) % n];
    Vec2 d = b - a;
    // Inward side of edge i for a CCW polygon.
    if (d.x() * (p.y() - a.y()) - d.y() * (p.x() - a.x()) <= tol) return false;
  }
  return true;
}

LocalPolygon make_local_polygon(std::span<const Vec3> loop) {
  const int n = int(loop.size());
  if (n < 3) throw Error("polygon needs at least 3 vertices");

  Vec3 normal = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3& a = loop[i];
    const Vec3& b = loop[(i + 1) % n];
    normal.x() += (a.y() - b.y()) * (a.z() + b.z());
    normal.y() += (a.z() - b.z()) * (a.x() + b.x());
    normal.z() += (a.x() - b.x()) * (a.y() + b.y());
  }
  double len = normal.norm();
  if (len == 0.0) throw NumericalError("zero-area polygon loop");
  normal /= len;

  LocalPolygon poly;
  poly.normal = normal;
  poly.origin = loop[0];
  Vec3 e0 = loop[1] - loop[0];
  e0 -= e0.dot(normal) * normal;
  poly.axis_eta = e0.normalized();
  poly.axis_zeta = normal.cross(poly.axis_eta);
  poly.vertices.reserve(n);
  for (int i = 0; i < n; ++i) poly.vertices.push_back(poly.to_local(loop[i]));
  return poly;
}

BasisEval wachspress_eval(const LocalPolygon& poly, const Vec2& p) {
  const int n = poly.size();
  // Edge i runs v_i -> v_{i+1}; outward normal for a CCW polygon.
  std::vector<Vec2> pe(n);  // scaled normals n_e / h_e
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly.vertices[i];
    const Vec2& b = poly.vertices[(i + 1) % n];
    Vec2 ne(b.y() - a.y(), a.x() - b.x());
    ne.normalize();
    double he = (a - p).dot(ne);
    if (he <= 0.0)
      throw NumericalError("wachspress_eval: point on or outside the polygon boundary");
    pe[i] = ne / he;
  }

  Eigen::VectorXd w(n);
  std::vector<Vec2> R(n);
  for (int i = 0; i < n; ++i) {
    const Vec2& p1 = pe[(i + n - 1) % n];  // edge ending at v_i
    const Vec2& p2 = pe[i];                // edge starting at v_i
    w[i] = p1.x() * p2.y() - p1.y() * p2.x();
    R[i] = p1 + p2;
  }
  const double wsum = w.sum();

  BasisEval out;
  out.N = w / wsum;
  Vec2 Rbar = Vec2::Zero();
  for (int i = 0; i < n; ++i) Rbar += out.N[i] * R[i];
  out.dN_deta.resize(n);
  out.dN_dzeta.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec2 g = out.N[i] * (R[i] - Rbar);
    out.dN_deta[i] = g.x();
    out.dN_dzeta[i] = g.y();
  }
  return out;
}

double wachspress_grad_check(const LocalPolygon& poly, const Vec2& p, double step) {
  BasisEval at = wachspress_eval(poly, p);
  BasisEval xp = wachspress_eval(poly, p + Vec2(step, 0));
  BasisEval xm = wachspress_eval(poly, p - Vec2(step, 0));
  BasisEval yp = wachspress_eval(poly, p + Vec2(0, step));
  BasisEval ym = wachspress_eval(poly, p - Vec2(0, step));
  double worst = 0.0;
  for (int i = 0; i < poly.size(); ++i) {
    double fd_eta = (xp.N[i] - xm.N[i]) / (2 * step);
    double fd_zeta = (yp.N[i] - ym.N[i]) / (2 * step);
    worst = std::max(worst, std::abs(at.dN_deta[i] - fd_eta));
    worst = std::max(worst, std::abs(at.dN_dzeta[i] - fd_zeta));
  }
  return worst;
}

namespace {

struct TrianglePoint {
  double l1, l2, l3, w;  // barycentric coordinates, weight (sums to 1)
};

// Symmetric Gauss rules on the triangle (weights normalized to sum 1).
std::vector<TrianglePoint> triangle_rule(int order) {
  switch (order) {
    case 1:
      return {{1. / 3, 1. / 3, 1. / 3, 1.0}};
    case 3:
      return {{2. / 3, 1. / 6, 1. / 6, 1. / 3},
              {1. / 6, 2. / 3, 1. / 6, 1. / 3},
              {1. / 6, 1. / 6, 2. / 3, 1. / 3}};
    case 6: {
      // Dunavant degree 4.
      const double a1 = 0.108103018168070, b1 = 0.445948490915965, w1 = 0.223381589678011;
      const double a2 = 0.816847572980459, b2 = 0.091576213509771, w2 = 0.109951743655322;
      return {{a1, b1, b1, w1}, {b1, a1, b1, w1}, {b1, b1, a1, w1},
              {a2, b2, b2, w2}, {b2, a2, b2, w2}, {b2, b2, a2, w2}};
    }
    case 12: {
      // Dunavant degree 6.
      const double a1 = 0.873821971016996, b1 = 0.063089014491502, w1 = 0.050844906370207;
      const double a2 = 0.501426509658179, b2 = 0.249286745170910, w2 = 0.116786275726379;
      const double a3 = 0.636502499121399, b3 = 0.310352451033785, c3 = 0.053145049844816,
                   w3 = 0.082851075618374;
      return {{a1, b1, b1, w1}, {b1, a1, b1, w1}, {b1, b1, a1, w1},
              {a2, b2, b2, w2}, {b2, a2, b2, w2}, {b2, b2, a2, w2},
              {a3, b3, c3, w3}, {a3, c3, b3, w3}, {b3, a3, c3, w3},
              {b3, c3, a3, w3}, {c3, a3, b3, w3}, {c3, b3, a3, w3}};
    }
    default:
      throw Error("unsupported triangle rule order " + std::to_string(order) +
                  " (supported: 1, 3, 6, 12)");
  }
}

} // namespace

QuadratureRule triangulate_and_quadrature(const LocalPolygon& poly, int gauss_order,
                                          int subdivisions) {
  if (subdivisions < 1) throw Error("subdivisions must be >= 1");
  const auto rule = triangle_rule(gauss_order);
  const Vec2 c = poly.centroid();
  const int n = poly.size();
  const int s = subdivisions;

  QuadratureRule out;
  out.points.reserve(size_t(n) * size_t(s) * size_t(s) * rule.size());
  out.weights.reserve(out.points.capacity());
  for (int t = 0; t < n; ++t) {
    const Vec2& a = poly.vertices[t];
    const Vec2& b = poly.vertices[(t + 1) % n];
    double area2 = (a.x() - c.x()) * (b.y() - c.y()) - (b.x() - c.x()) * (a.y() - c.y());
    const double sub_area = 0.5 * area2 / double(s * s);
    // Uniform barycentric lattice: s^2 congruent subtriangles per fan triangle.
    auto at = [&](int i, int j) -> Vec2 {
      return c + (double(i) / s) * (a - c) + (double(j) / s) * (b - c);
    };
    auto emit = [&](const Vec2& p0, const Vec2& p1, const Vec2& p2) {
      for (const auto& q : rule) {
        out.points.push_back(q.l1 * p0 + q.l2 * p1 + q.l3 * p2);
        out.weights.push_back(q.w * sub_area);
      }
    };
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s - i; ++j) {
        emit(at(i, j), at(i + 1, j), at(i, j + 1));
        if (i + j < s - 1) emit(at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
      }
  }
  return out;
}

bool strictly_convex(const LocalPolygon& poly, double rel_tol) {
  const int n = poly.size();
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    scale = std::max(scale, (poly.vertices[(i + 1) % n] - poly.vertices[i]).norm());
  const double tol = rel_tol * scale * scale;
  for (int i = 0; i < n; ++i) {
    const Vec2 e0 = poly.vertices[(i + 1) % n] - poly.vertices[i];
    const Vec2 e1 = poly.vertices[(i + 2) % n] - poly.vertices[(i + 1) % n];
    if (e0.x() * e1.y() - e0.y() * e1.x() <= tol) return false;
  }
  return true;
}

std::vector<std::vector<int>> convex_pieces(const LocalPolygon& poly) {
  const int n = poly.size();
  if (strictly_convex(poly)) {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    return {all};
  }

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    scale = std::max(scale, (poly.vertices[(i + 1) % n] - poly.vertices[i]).norm());
  const double area_tol = 1e-10 * scale * scale;

  // Ear clipping on a convex loop. An ear is only clipped if the remaining
  // polygon keeps positive area; this guarantees every vertex, including the
  // hanging ones, ends up a strict corner of some triangle, so the piecewise
  // interpolation stays conforming along sub-divided edges.
  auto cross2 = [&](int a, int b, int c) {
    const Vec2 e0 = poly.vertices[b] - poly.vertices[a];
    const Vec2 e1 = poly.vertices[c] - poly.vertices[b];
    return e0.x() * e1.y() - e0.y() * e1.x();
  };
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  double area2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec2& p = poly.vertices[i];
    const Vec2& q = poly.vertices[(i + 1) % n];
    area2 += p.x() * q.y() - q.x() * p.y();
  }

  std::vector<std::vector<int>> tris;
  while (idx.size() > 3) {
    const int m = int(idx.size());
    int pick = -1;
    for (int i = 0; i < m; ++i) {
      const int a = idx[(i + m - 1) % m], b = idx[i], c = idx[(i + 1) % m];
      const double ear2 = cross2(a, b, c);
      if (ear2 > area_tol && area2 - ear2 > area_tol) {
        pick = i;
        break;
      }
    }
    if (pick < 0) throw NumericalError("cannot triangulate degenerate polygon");
    const int a = idx[(pick + m - 1) % m], b = idx[pick], c = idx[(pick + 1) % m];
    area2 -= cross2(a, b, c);
    tris.push_back({a, b, c});
    idx.erase(idx.begin() + pick);
  }
  if (cross2(idx[0], idx[1], idx[2]) <= area_tol)
    throw NumericalError("cannot triangulate degenerate polygon");
  tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

} // namespace psbfem
