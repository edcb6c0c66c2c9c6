#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/types.hpp"

namespace cadalign {

/// The canonical unit box [-0.5, 0.5]^3 carried to world space by `transform`.
struct OrientedBox {
  Transform transform;

  static OrientedBox from_center_size(const Vec3& center, const Vec3& size,
                                      const Mat3& rotation = Mat3::Identity()) {
    return {Transform::linear(rotation * size.asDiagonal(), center)};
  }

  double volume() const { return std::abs(transform.linear_part().determinant()); }

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    for (int k = 0; k < 8; ++k)
      out[k] = transform.apply(Vec3((k & 1) ? 0.5 : -0.5, (k & 2) ? 0.5 : -0.5,
                                    (k & 4) ? 0.5 : -0.5));
    return out;
  }

  bool contains(const Vec3& p, double eps = 0.0) const {
    const Vec3 local = transform.inverse().apply(p);
    return (local.cwiseAbs().array() <= 0.5 + eps).all();
  }
};

namespace detail {

using Polygon = std::vector<Vec3>;

struct Polytope {
  std::vector<Polygon> faces;
};

inline Polytope box_polytope(const OrientedBox& box) {
  const auto c = box.corners();
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  Polytope p;
  for (const auto& q : quads) p.faces.push_back({c[q[0]], c[q[1]], c[q[2]], c[q[3]]});
  return p;
}

// Keeps the part with n.x <= d. Every face polygon is clipped, and the points
// created on the plane form the new cap face.
inline Polytope clip(const Polytope& in, const Vec3& n, double d) {
  constexpr double kEps = 1e-12;
  bool any_outside = false;
  for (const Polygon& face : in.faces)
    for (const Vec3& v : face) any_outside = any_outside || n.dot(v) - d > kEps;
  if (!any_outside) return in;
  Polytope out;
  std::vector<Vec3> cap;
  for (const Polygon& face : in.faces) {
    Polygon kept;
    const std::size_t m = face.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3& a = face[i];
      const Vec3& b = face[(i + 1) % m];
      const double da = n.dot(a) - d, db = n.dot(b) - d;
      if (da <= kEps) {
        kept.push_back(a);
        if (std::abs(da) <= kEps) cap.push_back(a);
      }
      if ((da < -kEps && db > kEps) || (da > kEps && db < -kEps)) {
        const Vec3 x = a + (da / (da - db)) * (b - a);
        kept.push_back(x);
        cap.push_back(x);
      }
    }
    if (kept.size() >= 3) out.faces.push_back(std::move(kept));
  }
  if (cap.size() >= 3) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cap) centroid += p;
    centroid /= static_cast<double>(cap.size());
    const Vec3 u = (n.unitOrthogonal()).normalized();
    const Vec3 v = n.normalized().cross(u);
    std::sort(cap.begin(), cap.end(), [&](const Vec3& p, const Vec3& q) {
      return std::atan2((p - centroid).dot(v), (p - centroid).dot(u)) <
             std::atan2((q - centroid).dot(v), (q - centroid).dot(u));
    });
    Polygon unique;
    for (const auto& p : cap)
      if (unique.empty() || (p - unique.back()).norm() > 1e-12) unique.push_back(p);
    while (unique.size() > 1 && (unique.front() - unique.back()).norm() <= 1e-12)
      unique.pop_back();
    if (unique.size() >= 3) out.faces.push_back(std::move(unique));
  }
  return out;
}

// Fan tetrahedra from an interior point; orientation-free for convex input.
inline double volume(const Polytope& p) {
  Vec3 c = Vec3::Zero();
  int count = 0;
  for (const auto& f : p.faces)
    for (const auto& v : f) {
      c += v;
      ++count;
    }
  if (count == 0) return 0.0;
  c /= count;
  double vol = 0.0;
  for (const auto& f : p.faces)
    for (std::size_t i = 1; i + 1 < f.size(); ++i)
      vol += std::abs((f[0] - c).dot((f[i] - c).cross(f[i + 1] - c))) / 6.0;
  return vol;
}

}  // namespace detail

/// Exact volume of the intersection of two oriented boxes.
inline double intersection_volume(const OrientedBox& a, const OrientedBox& b) {
  detail::Polytope poly = detail::box_polytope(a);
  const Mat3 inv_t = b.transform.linear_part().inverse().transpose();
  const Vec3 center = b.transform.translation_part();
  for (int axis = 0; axis < 3; ++axis)
    for (double sign : {1.0, -1.0}) {
      // local: sign * e_axis . x_local <= 0.5
      Vec3 n = sign * inv_t.col(axis);
      double d = 0.5 + n.dot(center);
      const double len = n.norm();
      n /= len;
      d /= len;
      poly = detail::clip(poly, n, d);
      if (poly.faces.empty()) return 0.0;
    }
  return detail::volume(poly);
}

inline double obb_iou(const OrientedBox& a, const OrientedBox& b) {
  const double va = a.volume(), vb = b.volume();
  require(va > 1e-12 && vb > 1e-12, "degenerate oriented box");
  const double inter = std::clamp(intersection_volume(a, b), 0.0, std::min(va, vb));
  return inter / (va + vb - inter);
}

}  // namespace cadalign
