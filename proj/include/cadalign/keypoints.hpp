#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/LU>

#include "cadalign/error.hpp"
#include "cadalign/mesh.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

struct Keypoint {
  Vec3 position = Vec3::Zero();
  double response = 0.0;
};

struct HarrisParams {
  // det(M) <= (trace(M)/3)^3, so k must stay below 1/27 for any response to
  // be positive.
  double k = 0.005;
  int window_radius = 2;     // voxels
  double nms_radius = 0.1;   // meters
  int max_count = 512;
  double threshold = 0.0;    // responses must exceed this
};

namespace detail {

// Central-difference SDF gradients, voxel units. A gradient is valid only when
// the stencil stays clear of the truncation band (clamped values and
// unobserved space produce artificial jumps).
inline std::vector<Vec3> sdf_gradients(const VoxelGrid& grid, std::vector<std::uint8_t>& valid) {
  std::vector<Vec3> g(grid.size(), Vec3::Zero());
  valid.assign(grid.size(), 0);
  const double lim = grid.truncation > 0.0 ? grid.truncation * (1.0 - 1e-9)
                                           : std::numeric_limits<double>::infinity();
  for (int k = 1; k + 1 < grid.dims.z(); ++k)
    for (int j = 1; j + 1 < grid.dims.y(); ++j)
      for (int i = 1; i + 1 < grid.dims.x(); ++i) {
        const double xm = grid.at(i - 1, j, k), xp = grid.at(i + 1, j, k);
        const double ym = grid.at(i, j - 1, k), yp = grid.at(i, j + 1, k);
        const double zm = grid.at(i, j, k - 1), zp = grid.at(i, j, k + 1);
        const double c = grid.at(i, j, k);
        if (std::max({std::abs(xm), std::abs(xp), std::abs(ym), std::abs(yp), std::abs(zm),
                      std::abs(zp), std::abs(c)}) >= lim)
          continue;
        const std::size_t idx = grid.index(i, j, k);
        g[idx] = 0.5 * Vec3(xp - xm, yp - ym, zp - zm) / grid.voxel_size;
        valid[idx] = 1;
      }
  return g;
}

}  // namespace detail

/// Harris response R = det(M) - k * trace(M)^3 of the Gaussian-weighted
/// structure tensor M of SDF gradients, evaluated at every near-surface voxel
/// (|sdf| < voxel_size). Non-candidates hold -inf.
inline std::vector<double> harris_response(const VoxelGrid& grid, const HarrisParams& params) {
  if (grid.kind != GridKind::SignedDF)
    fail(ErrorKind::Validation, "Harris detection needs a signed distance grid");
  require(params.window_radius >= 1, "Harris window radius must be at least 1 voxel");
  std::vector<std::uint8_t> valid;
  const std::vector<Vec3> grad = detail::sdf_gradients(grid, valid);

  const int r = params.window_radius;
  const double sigma = 0.5 * r + 0.5;
  std::vector<double> weights;
  for (int dz = -r; dz <= r; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        weights.push_back(std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * sigma * sigma)));

  std::vector<double> response(grid.size(), -std::numeric_limits<double>::infinity());
  for (int k = 0; k < grid.dims.z(); ++k)
    for (int j = 0; j < grid.dims.y(); ++j)
      for (int i = 0; i < grid.dims.x(); ++i) {
        if (!(std::abs(grid.at(i, j, k)) < grid.voxel_size)) continue;
        Mat3 M = Mat3::Zero();
        int w = 0;
        for (int dz = -r; dz <= r; ++dz)
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx, ++w) {
              const int x = i + dx, y = j + dy, z = k + dz;
              if (!grid.in_bounds(x, y, z)) continue;
              const std::size_t idx = grid.index(x, y, z);
              if (!valid[idx]) continue;
              M.noalias() += weights[w] * grad[idx] * grad[idx].transpose();
            }
        const double tr = M.trace();
        response[grid.index(i, j, k)] = M.determinant() - params.k * tr * tr * tr;
      }
  return response;
}

/// 3D Harris keypoints on a signed distance grid, strongest first, no two
/// closer than nms_radius.
inline std::vector<Keypoint> detect_harris(const VoxelGrid& grid,
                                           const HarrisParams& params = {}) {
  const std::vector<double> response = harris_response(grid, params);
  std::vector<std::size_t> cand;
  for (std::size_t idx = 0; idx < response.size(); ++idx)
    if (response[idx] > params.threshold) cand.push_back(idx);
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
    return response[a] > response[b];
  });

  std::vector<Keypoint> out;
  const double r2 = params.nms_radius * params.nms_radius;
  for (std::size_t idx : cand) {
    if (static_cast<int>(out.size()) >= params.max_count) break;
    const Vec3 p = grid.center(grid.unravel(idx));
    bool suppressed = false;
    for (const auto& kp : out)
      if ((kp.position - p).squaredNorm() < r2) {
        suppressed = true;
        break;
      }
    if (!suppressed) out.push_back({p, response[idx]});
  }
  return out;
}

struct SurfacePair {
  Vec3 cad_point = Vec3::Zero();   // model space
  Vec3 scan_point = Vec3::Zero();  // world space
};

/// Uniform point on the surface, area weighted.
class SurfaceSampler {
 public:
  explicit SurfaceSampler(const TriangleMesh& mesh) : mesh_(mesh) {
    require(!mesh.empty(), "cannot sample an empty mesh");
    std::vector<double> areas;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
      areas.push_back(mesh.triangle_area(t));
    pick_ = std::discrete_distribution<int>(areas.begin(), areas.end());
  }

  template <class Rng>
  Vec3 operator()(Rng& rng) {
    const int t = pick_(rng);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double r1 = std::sqrt(u01(rng)), r2 = u01(rng);
    return (1.0 - r1) * mesh_.vertex(t, 0) + r1 * (1.0 - r2) * mesh_.vertex(t, 1) +
           r1 * r2 * mesh_.vertex(t, 2);
  }

 private:
  const TriangleMesh& mesh_;
  std::discrete_distribution<int> pick_;
};

/// Surface samples of the CAD model mapped into the scan by `gt`, kept when
/// the scan SDF there is within reject_dist of zero. Throws once 100 * count
/// draws have been spent.
inline std::vector<SurfacePair> sample_surface_pairs(const TriangleMesh& cad_mesh,
                                                     const VoxelGrid& scan, const Transform& gt,
                                                     int count, double reject_dist,
                                                     std::uint64_t seed) {
  require(count >= 0, "sample count must be non-negative");
  if (!gt.is_invertible()) fail(ErrorKind::Validation, "ground-truth transform is not invertible");
  std::mt19937_64 rng(seed);
  SurfaceSampler sampler(cad_mesh);
  std::vector<SurfacePair> out;
  const long budget = 100L * count;
  for (long attempt = 0; attempt < budget && static_cast<int>(out.size()) < count; ++attempt) {
    const Vec3 c = sampler(rng);
    const Vec3 s = gt.apply(c);
    if (std::abs(sample_trilinear(scan, s).value) < reject_dist) out.push_back({c, s});
  }
  if (static_cast<int>(out.size()) < count)
    fail(ErrorKind::Numerical, "surface sampling exhausted: scan and CAD disagree beyond " +
                                   std::to_string(reject_dist) + " m");
  return out;
}

}  // namespace cadalign
