#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cadalign/cadalign.hpp"

namespace testutil {

using namespace cadalign;

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline double seg_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// Plane projection when it lands inside, else the nearest edge.
inline double tri_dist_oracle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a).normalized();
  const Vec3 q = p - (p - a).dot(n) * n;
  const bool inside = (b - a).cross(q - a).dot(n) >= 0 && (c - b).cross(q - b).dot(n) >= 0 &&
                      (a - c).cross(q - c).dot(n) >= 0;
  if (inside) return std::abs((p - a).dot(n));
  return std::min({seg_dist(p, a, b), seg_dist(p, b, c), seg_dist(p, c, a)});
}

inline double mesh_dist_oracle(const TriangleMesh& m, const Vec3& p) {
  double best = 1e300;
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
    best = std::min(best, tri_dist_oracle(p, m.vertex(t, 0), m.vertex(t, 1), m.vertex(t, 2)));
  return best;
}

inline TriangleMesh random_mesh(std::mt19937_64& rng, int triangles) {
  TriangleMesh m;
  while (static_cast<int>(m.triangles.size()) < triangles) {
    const Vec3 a = random_vec(rng, -1, 1);
    const Vec3 b = a + random_vec(rng, -0.4, 0.4), c = a + random_vec(rng, -0.4, 0.4);
    if ((b - a).cross(c - a).norm() < 1e-3) continue;
    const int base = static_cast<int>(m.vertices.size());
    m.vertices.insert(m.vertices.end(), {a, b, c});
    m.triangles.emplace_back(base, base + 1, base + 2);
  }
  return m;
}

inline std::vector<Transform> sphere_cameras(int count, double dist, const Vec3& target) {
  std::vector<Transform> out;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double y = 1.0 - 2.0 * (k + 0.5) / count, r = std::sqrt(1.0 - y * y);
    out.push_back(look_at(target + dist * Vec3(r * std::cos(golden * k), y, r * std::sin(golden * k)),
                          target));
  }
  return out;
}

inline DepthImage camera(int w, int h, double f, const Transform& pose) {
  return DepthImage::blank(w, h, f, f, 0.5 * (w - 1), 0.5 * (h - 1), pose);
}

// Heatmap alignment problem whose heatmaps are Gaussians around the true
// model-space positions of random scan points.
struct SyntheticProblem {
  AlignmentProblem problem;
  Transform truth;
  PoseParams truth_params;
};

inline std::shared_ptr<const VoxelGrid> gaussian_heatmap(const Vec3& center, double sigma_m) {
  VoxelGrid g = VoxelGrid::filled(Index3::Constant(kCadGridDim), 1.5 / (kCadGridDim - 1),
                                  Vec3::Constant(-0.75), 0.0, GridKind::Heatmap, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    g.values[i] = std::exp(-(g.center(g.unravel(i)) - center).squaredNorm() / (2 * sigma_m * sigma_m));
  return std::make_shared<const VoxelGrid>(std::move(g));
}

inline SyntheticProblem synthetic_problem(std::mt19937_64& rng, int pairs, double sigma_m = 0.08) {
  SyntheticProblem sp;
  std::uniform_real_distribution<double> u(-1, 1);
  sp.truth_params.a << 0.2 * u(rng), 0.8 * u(rng), 0.2 * u(rng), u(rng), 0.5 + 0.2 * u(rng), u(rng);
  sp.truth_params.s = Vec3(1 + 0.2 * u(rng), 1 + 0.2 * u(rng), 1 + 0.2 * u(rng));
  sp.truth = pose_to_matrix(sp.truth_params);
  sp.problem.cad_id = "m";
  for (int j = 0; j < pairs; ++j) {
    const Vec3 c = random_vec(rng, -0.45, 0.45);
    CorrespondencePair p;
    p.cad_id = "m";
    p.scan_point = sp.truth.apply(c);
    p.heatmap = {gaussian_heatmap(c, sigma_m), "m"};
    p.compatibility = 1.0;
    p.scale_pred = sp.truth_params.s;
    sp.problem.pairs.push_back(p);
  }
  return sp;
}

}  // namespace testutil
