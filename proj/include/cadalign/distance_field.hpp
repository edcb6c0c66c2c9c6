#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/mesh.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

/// Cubic lattice of `dims` voxels whose centers span the mesh bounding box
/// grown by `padding` on every side (the widest axis sets the voxel size).
inline VoxelGrid df_lattice(const Aabb& box, const Index3& dims, double padding) {
  require(dims.minCoeff() >= 2, "distance field needs at least 2 voxels per axis");
  const Vec3 ext = box.extent() + Vec3::Constant(2.0 * padding);
  double vs = 0.0;
  for (int a = 0; a < 3; ++a) vs = std::max(vs, ext[a] / (dims[a] - 1));
  require(vs > 0.0, "mesh bounding box is degenerate");
  const Vec3 half = 0.5 * vs * (dims - Index3::Ones()).cast<double>();
  return VoxelGrid::filled(dims, vs, box.center() - half, 0.0, GridKind::UnsignedDF, 0.0);
}

/// Exact unsigned distance field of a triangle mesh.
///
/// Triangles are visited in order of their bounding-box distance to the voxel
/// and the scan stops once that lower bound exceeds the best exact distance.
inline VoxelGrid mesh_to_df(const TriangleMesh& mesh, const Index3& dims, double padding) {
  if (mesh.empty()) fail(ErrorKind::Validation, "cannot build a distance field from an empty mesh");
  mesh.validate();
  VoxelGrid grid = df_lattice(mesh.bounds(), dims, padding);

  const int nt = static_cast<int>(mesh.triangles.size());
  std::vector<Vec3> lo(nt), hi(nt);
  for (int t = 0; t < nt; ++t) {
    const Vec3 a = mesh.vertex(t, 0), b = mesh.vertex(t, 1), c = mesh.vertex(t, 2);
    lo[t] = a.cwiseMin(b).cwiseMin(c);
    hi[t] = a.cwiseMax(b).cwiseMax(c);
  }

  std::vector<std::pair<double, int>> order(nt);
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const Vec3 p = grid.center(grid.unravel(idx));
    for (int t = 0; t < nt; ++t) {
      const Vec3 d = (lo[t] - p).cwiseMax(p - hi[t]).cwiseMax(Vec3::Zero());
      order[t] = {d.squaredNorm(), t};
    }
    std::sort(order.begin(), order.end());
    double best2 = std::numeric_limits<double>::infinity();
    for (const auto& [bound2, t] : order) {
      if (bound2 >= best2) break;
      const Vec3 q = closest_point_on_triangle(p, mesh.vertex(t, 0), mesh.vertex(t, 1),
                                               mesh.vertex(t, 2));
      best2 = std::min(best2, (p - q).squaredNorm());
    }
    grid.values[idx] = std::sqrt(best2);
  }
  return grid;
}

}  // namespace cadalign
