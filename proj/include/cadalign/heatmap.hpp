#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

/// Correspondence heatmap over a CAD model's voxel domain. Grids are shared:
/// all-zero heatmaps of one CAD can point at the same storage.
struct Heatmap {
  std::shared_ptr<const VoxelGrid> grid;
  std::string cad_id;

  const VoxelGrid& values() const { return *grid; }
};

/// Model-space images of a point under the symmetry group (Cinf sampled at
/// 10 degree steps).
inline std::vector<Vec3> symmetry_orbit(const Vec3& p, const SymmetryTag& sym) {
  const int n = sym.type == SymmetryType::Cinf ? 36 : sym.order();
  std::vector<Vec3> out;
  out.reserve(n);
  const Vec3 axis = sym.axis.normalized();
  for (int k = 0; k < n; ++k)
    out.push_back(Eigen::AngleAxisd(2.0 * kPi * k / n, axis) * p);
  return out;
}

/// Target heatmap for a model-space keypoint: unnormalized Gaussians of
/// width sigma (voxels) centered on the nearest voxel of each symmetry image,
/// combined by max, so the peak is exactly 1.
inline VoxelGrid make_target_heatmap(const VoxelGrid& domain, const Vec3& keypoint,
                                     const SymmetryTag& sym, double sigma) {
  require(sigma > 0.0, "heatmap sigma must be positive");
  const Vec3 u = domain.to_voxel(keypoint);
  for (int a = 0; a < 3; ++a)
    if (!(u[a] >= -0.5 && u[a] <= domain.dims[a] - 0.5))
      fail(ErrorKind::Validation, "keypoint lies outside the CAD grid");

  std::vector<Vec3> centers;
  for (const Vec3& q : symmetry_orbit(keypoint, sym)) {
    const Index3 c = domain.nearest_index(q);
    if (!domain.in_bounds(c.x(), c.y(), c.z())) continue;
    const Vec3 cd = c.cast<double>();
    if (std::none_of(centers.begin(), centers.end(), [&](const Vec3& e) { return e == cd; }))
      centers.push_back(cd);
  }

  VoxelGrid hm = domain.like(GridKind::Heatmap, 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> dyz(centers.size());
  for (int k = 0; k < hm.dims.z(); ++k)
    for (int j = 0; j < hm.dims.y(); ++j) {
      for (std::size_t c = 0; c < centers.size(); ++c)
        dyz[c] = (j - centers[c].y()) * (j - centers[c].y()) + (k - centers[c].z()) * (k - centers[c].z());
      for (int i = 0; i < hm.dims.x(); ++i) {
        double d2 = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
          const double dx = i - centers[c].x();
          d2 = std::min(d2, dx * dx + dyz[c]);
        }
        hm.at(i, j, k) = std::exp(-d2 * inv);
      }
    }
  return hm;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Element-wise sigmoid and the softmax over all voxels of a raw score grid.
struct HeatmapParts {
  VoxelGrid sigmoid;  // H1
  VoxelGrid softmax;  // H2
};

inline HeatmapParts heatmap_parts(const VoxelGrid& raw) {
  HeatmapParts p{raw.like(GridKind::Heatmap, 0.0), raw.like(GridKind::Heatmap, 0.0)};
  const double mx = *std::max_element(raw.values.begin(), raw.values.end());
  double z = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    p.sigmoid.values[i] = sigmoid(raw.values[i]);
    p.softmax.values[i] = std::exp(raw.values[i] - mx);
    z += p.softmax.values[i];
  }
  for (double& v : p.softmax.values) v /= z;
  return p;
}

/// H = sigmoid(S) * softmax(S), element-wise.
inline VoxelGrid combine_heatmaps(const VoxelGrid& raw) {
  HeatmapParts p = heatmap_parts(raw);
  VoxelGrid h = std::move(p.sigmoid);
  for (std::size_t i = 0; i < h.size(); ++i)
    h.values[i] = std::clamp(h.values[i] * p.softmax.values[i], 0.0, 1.0);
  return h;
}

struct HeatmapLossWeights {
  double positive_weight = 64.0;  // w(x) where the target exceeds positive_cutoff
  double positive_cutoff = 1e-3;
  double nll_weight = 64.0;       // v
};

inline double clamped_log(double x) { return std::log(std::max(x, 1e-12)); }

inline double bce(double p, double y) {
  return -(y * clamped_log(p) + (1.0 - y) * clamped_log(1.0 - p));
}

/// Weighted BCE on sigmoid(S) plus weighted NLL on softmax(S), summed over Ω.
inline double loss_heatmap(const VoxelGrid& raw, const VoxelGrid& target,
                           const HeatmapLossWeights& w = {}) {
  require(raw.dims == target.dims, "heatmap loss: raw and target shapes differ");
  const HeatmapParts p = heatmap_parts(raw);
  double bce_sum = 0.0, nll_sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double y = target.values[i];
    const double wx = y > w.positive_cutoff ? w.positive_weight : 1.0;
    bce_sum += wx * bce(p.sigmoid.values[i], y);
    nll_sum += w.nll_weight * (-y * clamped_log(p.softmax.values[i]));
  }
  return bce_sum + nll_sum;
}

inline double loss_compat(double raw, int label) {
  return bce(sigmoid(raw), label ? 1.0 : 0.0);
}

inline double loss_scale(const Vec3& pred, const Vec3& target) {
  return (pred - target).squaredNorm();
}

struct LossParts {
  double heatmap = 0.0;
  double compat = 0.0;
  double scale = 0.0;
  bool positive = true;
};

/// Weighted total; heatmap and scale terms are masked out for negatives.
inline double loss_total(const LossParts& parts) {
  if (!parts.positive) return 0.1 * parts.compat;
  return 1.0 * parts.heatmap + 0.1 * parts.compat + 0.2 * parts.scale;
}

}  // namespace cadalign
