#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/types.hpp"

namespace cadalign {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool empty() const { return (hi.array() < lo.array()).any(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }

  double squared_distance(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
  }

  // Slab test. Returns the entry parameter if the ray hits within [0, t_max].
  bool ray_hits(const Vec3& origin, const Vec3& inv_dir, double t_max) const {
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double ta = (lo[a] - origin[a]) * inv_dir[a];
      double tb = (hi[a] - origin[a]) * inv_dir[a];
      if (ta > tb) std::swap(ta, tb);
      if (std::isnan(ta) || std::isnan(tb)) continue;
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Index3> triangles;
  std::string category;

  bool empty() const { return triangles.empty(); }

  Vec3 vertex(int tri, int corner) const { return vertices[triangles[tri][corner]]; }

  double triangle_area(int tri) const {
    return 0.5 * (vertex(tri, 1) - vertex(tri, 0)).cross(vertex(tri, 2) - vertex(tri, 0)).norm();
  }

  double surface_area() const {
    double a = 0.0;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) a += triangle_area(t);
    return a;
  }

  Aabb bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.extend(v);
    return box;
  }

  void validate() const {
    const int n = static_cast<int>(vertices.size());
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
      const Index3& tri = triangles[t];
      require(tri.minCoeff() >= 0 && tri.maxCoeff() < n, "triangle index out of range");
      require(triangle_area(t) > 1e-12, "degenerate triangle in mesh");
    }
  }

  TriangleMesh transformed(const Transform& tf) const {
    TriangleMesh out = *this;
    for (auto& v : out.vertices) v = tf.apply(v);
    return out;
  }

  void append(const TriangleMesh& other) {
    const int base = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& t : other.triangles) triangles.push_back(t + Index3::Constant(base));
  }
};

/// Closest point on triangle (a, b, c) to p, by Voronoi region classification.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

/// Möller-Trumbore; returns the ray parameter of the hit, if any, in (eps, inf).
inline std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                          const Vec3& b, const Vec3& c) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kEps) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (t <= kEps) return std::nullopt;
  return t;
}

/// Exact unsigned distance from p to the mesh surface. Triangles whose
/// bounding boxes are farther than the current best are skipped.
inline double mesh_distance(const TriangleMesh& mesh, const Vec3& p) {
  double best2 = std::numeric_limits<double>::infinity();
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const Vec3 a = mesh.vertex(t, 0), b = mesh.vertex(t, 1), c = mesh.vertex(t, 2);
    const Vec3 lo = a.cwiseMin(b).cwiseMin(c), hi = a.cwiseMax(b).cwiseMax(c);
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
    if (d.squaredNorm() >= best2) continue;
    best2 = std::min(best2, (p - closest_point_on_triangle(p, a, b, c)).squaredNorm());
  }
  return std::sqrt(best2);
}

/// Axis-aligned cuboid with 12 outward-wound triangles.
inline TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int k = 0; k < 8; ++k)
    m.vertices.emplace_back((k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(),
                            (k & 4) ? hi.z() : lo.z());
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    m.triangles.emplace_back(q[0], q[1], q[2]);
    m.triangles.emplace_back(q[0], q[2], q[3]);
  }
  return m;
}

/// Closed cylinder around the +y axis.
inline TriangleMesh make_cylinder(const Vec3& base_center, double radius, double height,
                                  int segments = 24) {
  TriangleMesh m;
  const double pi = std::acos(-1.0);
  for (int s = 0; s < segments; ++s) {
    const double th = 2.0 * pi * s / segments;
    const Vec3 off(radius * std::cos(th), 0.0, radius * std::sin(th));
    m.vertices.push_back(base_center + off);
    m.vertices.push_back(base_center + off + Vec3(0, height, 0));
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.push_back(base_center);
  m.vertices.push_back(base_center + Vec3(0, height, 0));
  const int top = bottom + 1;
  for (int s = 0; s < segments; ++s) {
    const int n = (s + 1) % segments;
    const int b0 = 2 * s, t0 = 2 * s + 1, b1 = 2 * n, t1 = 2 * n + 1;
    m.triangles.emplace_back(b0, t0, t1);
    m.triangles.emplace_back(b0, t1, b1);
    m.triangles.emplace_back(bottom, b0, b1);
    m.triangles.emplace_back(top, t1, t0);
  }
  return m;
}

/// UV sphere.
inline TriangleMesh make_sphere(const Vec3& center, double radius, int stacks = 32,
                                int slices = 64) {
  TriangleMesh m;
  const double pi = std::acos(-1.0);
  m.vertices.push_back(center + Vec3(0, radius, 0));
  for (int i = 1; i < stacks; ++i) {
    const double phi = pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double th = 2.0 * pi * j / slices;
      m.vertices.push_back(center + radius * Vec3(std::sin(phi) * std::cos(th), std::cos(phi),
                                                  std::sin(phi) * std::sin(th)));
    }
  }
  m.vertices.push_back(center - Vec3(0, radius, 0));
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  for (int j = 0; j < slices; ++j) m.triangles.emplace_back(0, ring(1, j + 1), ring(1, j));
  for (int i = 1; i + 1 < stacks; ++i)
    for (int j = 0; j < slices; ++j) {
      m.triangles.emplace_back(ring(i, j), ring(i, j + 1), ring(i + 1, j + 1));
      m.triangles.emplace_back(ring(i, j), ring(i + 1, j + 1), ring(i + 1, j));
    }
  for (int j = 0; j < slices; ++j)
    m.triangles.emplace_back(south, ring(stacks - 1, j), ring(stacks - 1, j + 1));
  return m;
}

}  // namespace cadalign
