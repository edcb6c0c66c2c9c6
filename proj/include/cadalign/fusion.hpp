#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/types.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

/// Pinhole depth image. Camera looks down +z with x right and y down;
/// pixel (u, v) has its center at integer coordinates.
struct DepthImage {
  int width = 0;
  int height = 0;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  std::vector<double> depth;  // meters, 0 = invalid
  Transform camera_to_world;

  static DepthImage blank(int width, int height, double fx, double fy, double cx, double cy,
                          const Transform& camera_to_world) {
    require(width > 0 && height > 0, "depth image needs positive size");
    require(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
    DepthImage img;
    img.width = width;
    img.height = height;
    img.fx = fx;
    img.fy = fy;
    img.cx = cx;
    img.cy = cy;
    img.camera_to_world = camera_to_world;
    img.depth.assign(static_cast<std::size_t>(width) * height, 0.0);
    return img;
  }

  double& at(int u, int v) { return depth[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }

  /// Camera-space ray through a pixel center, scaled so that z == 1.
  Vec3 ray_camera(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  void validate() const {
    require(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
    require(depth.size() == static_cast<std::size_t>(width) * height,
            "depth buffer size does not match image size");
    for (double d : depth) require(!(std::isfinite(d) && d < 0.0), "negative depth value");
  }
};

/// Camera-to-world pose looking from `eye` at `target`.
inline Transform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY()) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  const Vec3 y = z.cross(x);  // image y points down when `up` is world up
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return Transform::linear(R, eye);
}

/// Fresh TSDF and weight volumes. Unobserved voxels hold -truncation, which
/// reads as "unseen" to the free-space confidence.
inline std::pair<VoxelGrid, VoxelGrid> make_tsdf_volume(const Index3& dims, double voxel_size,
                                                        const Vec3& origin, double truncation) {
  require(truncation > 0.0, "truncation must be positive");
  VoxelGrid sdf =
      VoxelGrid::filled(dims, voxel_size, origin, truncation, GridKind::SignedDF, -truncation);
  VoxelGrid w = sdf.like(GridKind::Weight, 0.0);
  return {std::move(sdf), std::move(w)};
}

/// Integrates one depth image with uniform per-sample weight 1.
inline void fuse_depth(VoxelGrid& grid, VoxelGrid& weights, const DepthImage& image) {
  require(grid.kind == GridKind::SignedDF, "fusion target must be a signed distance grid");
  require(same_lattice(grid, weights) && weights.values.size() == grid.values.size(),
          "grid and weight volumes differ in dims, origin or voxel size");
  require(grid.truncation > 0.0, "fusion needs a positive truncation");
  if (!image.camera_to_world.is_invertible())
    fail(ErrorKind::Numerical, "camera pose is not invertible");
  const Transform world_to_cam = image.camera_to_world.inverse();
  const double trunc = grid.truncation;
  const Mat3 R = world_to_cam.linear_part();
  const Vec3 t = world_to_cam.translation_part();

  // Camera-space positions advance by a fixed step along x.
  const Vec3 step = grid.voxel_size * R.col(0);
  const double umax = image.width - 0.5, vmax = image.height - 0.5;
  for (int k = 0; k < grid.dims.z(); ++k)
    for (int j = 0; j < grid.dims.y(); ++j) {
      const Vec3 row = R * grid.center(0, j, k) + t;
      double px = row.x(), py = row.y(), pz = row.z();
      for (int i = 0; i < grid.dims.x(); ++i, px += step.x(), py += step.y(), pz += step.z()) {
        if (pz <= 0.0) continue;
        const double inv_z = 1.0 / pz;
        // Pixel centers sit at integers; ties round away from zero.
        const double uf = image.fx * px * inv_z + image.cx;
        const double vf = image.fy * py * inv_z + image.cy;
        if (!(uf > -0.5 && uf < umax && vf > -0.5 && vf < vmax)) continue;
        const int u = static_cast<int>(std::floor(uf + 0.5));
        const int v = static_cast<int>(std::floor(vf + 0.5));
        const double depth = image.at(u, v);
        if (!(depth > 0.0) || !std::isfinite(depth)) continue;
        const double d = depth - pz;
        if (d <= -trunc) continue;
        const double sample = std::min(d, trunc);
        const std::size_t idx = grid.index(i, j, k);
        const double w = weights.values[idx];
        const double fused = (grid.values[idx] * w + sample) / (w + 1.0);
        grid.values[idx] = std::clamp(fused, -trunc, trunc);
        weights.values[idx] = w + 1.0;
      }
    }
}

}  // namespace cadalign
