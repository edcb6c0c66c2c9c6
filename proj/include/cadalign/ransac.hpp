#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/lm.hpp"
#include "cadalign/obb.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

struct DescribedKeypoint {
  Vec3 position = Vec3::Zero();
  Eigen::VectorXd descriptor;
};

/// Flattened (2r+1)^3 patch of grid samples around p, one voxel apart.
inline Eigen::VectorXd patch_descriptor(const VoxelGrid& grid, const Vec3& p, int radius = 2) {
  const int w = 2 * radius + 1;
  Eigen::VectorXd d(w * w * w);
  int n = 0;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        d[n++] = sample_trilinear(grid, p + grid.voxel_size * Vec3(dx, dy, dz)).value;
  return d;
}

inline std::vector<DescribedKeypoint> describe(const VoxelGrid& grid,
                                               const std::vector<Vec3>& points, int radius = 2) {
  std::vector<DescribedKeypoint> out;
  for (const Vec3& p : points) out.push_back({p, patch_descriptor(grid, p, radius)});
  return out;
}

struct RansacConfig {
  int iterations = 2000;
  int top_k = 8;
  double max_height_diff = 0.8;   // meters
  double inlier_radius = 0.2;     // meters
  double max_descriptor_dist = std::numeric_limits<double>::infinity();
  int min_inliers = 3;
  int max_models = 1;
  OrientedBox cad_box;            // model space extent used to mark off keypoints
  std::string cad_id;
  std::uint64_t seed = 0;
};

struct RansacResult {
  std::vector<AlignmentCandidate> candidates;
  bool degenerate = false;
};

namespace detail {

struct Match {
  int scan = 0;
  Vec3 cad = Vec3::Zero();   // scaled model point
  Vec3 world = Vec3::Zero();
};

// Yaw about +y and translation minimizing sum |R c + t - p|^2.
inline std::optional<std::pair<Mat3, Vec3>> fit_yaw(const std::vector<const Match*>& m) {
  Vec3 cb = Vec3::Zero(), pb = Vec3::Zero();
  for (const Match* x : m) {
    cb += x->cad;
    pb += x->world;
  }
  cb /= double(m.size());
  pb /= double(m.size());
  double a = 0.0, b = 0.0;
  for (const Match* x : m) {
    const Vec3 c = x->cad - cb, p = x->world - pb;
    a += c.x() * p.x() + c.z() * p.z();
    b += c.z() * p.x() - c.x() * p.z();
  }
  if (std::hypot(a, b) < 1e-12) return std::nullopt;
  const Mat3 R = yaw_rotation(std::atan2(b, a));
  return std::make_pair(R, Vec3(pb - R * cb));
}

inline bool collinear(const Vec3& a, const Vec3& b, const Vec3& c, double eps = 1e-9) {
  return (b - a).cross(c - a).norm() <= eps * std::max(1.0, (b - a).norm() * (c - a).norm());
}

}  // namespace detail

/// Up-right (yaw only) RANSAC alignment with scale fixed to class_scale.
/// Accepted models mark off their inliers and every scan keypoint inside the
/// aligned box before the next model is searched.
inline RansacResult ransac_align(const std::vector<DescribedKeypoint>& scan,
                                 const std::vector<DescribedKeypoint>& cad,
                                 const Vec3& class_scale, const RansacConfig& cfg = {}) {
  require(class_scale.minCoeff() > 0.0, "class scale must be positive");
  require(cfg.iterations >= 1 && cfg.top_k >= 1, "RANSAC iterations and top_k must be positive");
  for (const auto& c : cad)
    for (const auto& s : scan)
      require(c.descriptor.size() == s.descriptor.size(), "descriptor lengths differ");

  std::vector<detail::Match> matches;
  for (int i = 0; i < static_cast<int>(scan.size()); ++i) {
    std::vector<std::pair<double, int>> near;
    for (int j = 0; j < static_cast<int>(cad.size()); ++j) {
      const Vec3 c = class_scale.cwiseProduct(cad[j].position);
      if (std::abs(c.y() - scan[i].position.y()) >= cfg.max_height_diff) continue;
      const double d = (scan[i].descriptor - cad[j].descriptor).norm();
      if (d <= cfg.max_descriptor_dist) near.push_back({d, j});
    }
    std::stable_sort(near.begin(), near.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (static_cast<int>(near.size()) > cfg.top_k) near.resize(cfg.top_k);
    for (const auto& [d, j] : near)
      matches.push_back({i, class_scale.cwiseProduct(cad[j].position), scan[i].position});
  }
  if (matches.size() < 3) fail(ErrorKind::Validation, "RANSAC needs at least 3 candidate correspondences");

  RansacResult out;
  bool any_spread = false;
  for (std::size_t k = 2; k < matches.size() && !any_spread; ++k)
    any_spread = !detail::collinear(matches[0].cad, matches[1].cad, matches[k].cad) ||
                 !detail::collinear(matches[0].world, matches[1].world, matches[k].world);
  if (!any_spread) {
    out.degenerate = true;
    return out;
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<char> active(scan.size(), 1);
  const double r2 = cfg.inlier_radius * cfg.inlier_radius;

  // Per scan keypoint, the closest matching residual under (R, t).
  auto inliers_of = [&](const Mat3& R, const Vec3& t) {
    std::vector<int> best(scan.size(), -1);
    std::vector<double> bd(scan.size(), r2);
    for (int m = 0; m < static_cast<int>(matches.size()); ++m) {
      const auto& x = matches[m];
      if (!active[x.scan]) continue;
      const double d = (R * x.cad + t - x.world).squaredNorm();
      if (d < bd[x.scan]) {
        bd[x.scan] = d;
        best[x.scan] = m;
      }
    }
    std::vector<int> idx;
    for (int b : best)
      if (b >= 0) idx.push_back(b);
    return idx;
  };

  for (int model = 0; model < cfg.max_models; ++model) {
    std::vector<int> live;
    for (int m = 0; m < static_cast<int>(matches.size()); ++m)
      if (active[matches[m].scan]) live.push_back(m);
    if (live.size() < 3) break;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(live.size()) - 1);

    std::vector<int> best_inliers;
    for (int it = 0; it < cfg.iterations; ++it) {
      const auto& a = matches[live[pick(rng)]];
      const auto& b = matches[live[pick(rng)]];
      const auto& c = matches[live[pick(rng)]];
      if (a.scan == b.scan || a.scan == c.scan || b.scan == c.scan) continue;
      if (detail::collinear(a.cad, b.cad, c.cad)) continue;
      const auto fit = detail::fit_yaw({&a, &b, &c});
      if (!fit) continue;
      std::vector<int> inl = inliers_of(fit->first, fit->second);
      if (inl.size() > best_inliers.size()) best_inliers = std::move(inl);
    }
    if (static_cast<int>(best_inliers.size()) < std::max(cfg.min_inliers, 3)) break;

    std::vector<const detail::Match*> sel;
    for (int m : best_inliers) sel.push_back(&matches[m]);
    auto fit = detail::fit_yaw(sel);
    if (!fit) break;
    // One refit on the refined inlier set.
    std::vector<int> refined = inliers_of(fit->first, fit->second);
    if (refined.size() >= best_inliers.size()) {
      sel.clear();
      for (int m : refined) sel.push_back(&matches[m]);
      if (auto f2 = detail::fit_yaw(sel)) {
        fit = f2;
        best_inliers = refined;
      }
    }

    const auto& [R, t] = *fit;
    AlignmentCandidate cand;
    cand.cad_id = cfg.cad_id;
    cand.pose = Transform::linear(R * class_scale.asDiagonal(), t);
    Mat4 g = Mat4::Identity();
    g.block<3, 3>(0, 0) = R;
    g.block<3, 1>(0, 3) = t;
    cand.params = {log_se3(g), class_scale};
    cand.cost = 0.0;
    for (int m : best_inliers)
      cand.cost += (R * matches[m].cad + t - matches[m].world).squaredNorm();
    cand.accepted_steps = static_cast<int>(best_inliers.size());
    cand.restart_index = model;

    const OrientedBox box{cand.pose * cfg.cad_box.transform};
    for (int m : best_inliers) active[matches[m].scan] = 0;
    for (std::size_t i = 0; i < scan.size(); ++i)
      if (box.contains(scan[i].position)) active[i] = 0;
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

}  // namespace cadalign
