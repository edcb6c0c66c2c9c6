#pragma once

#include <limits>
#include <vector>

#include "cadalign/fusion.hpp"
#include "cadalign/mesh.hpp"

namespace cadalign {

/// Ray-cast depth image (camera z distance of the nearest hit, 0 on miss).
/// `camera` supplies size, intrinsics and pose; its depth buffer is ignored.
inline DepthImage render_depth(const std::vector<TriangleMesh>& meshes, const DepthImage& camera) {
  DepthImage img = DepthImage::blank(camera.width, camera.height, camera.fx, camera.fy, camera.cx,
                                     camera.cy, camera.camera_to_world);
  std::vector<Aabb> boxes;
  for (const auto& m : meshes) boxes.push_back(m.bounds());
  const Mat3 R = camera.camera_to_world.linear_part();
  const Vec3 origin = camera.camera_to_world.translation_part();
  const double inf = std::numeric_limits<double>::infinity();

  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      const Vec3 dir = R * camera.ray_camera(u, v);  // unit camera z, so t is depth
      const Vec3 inv = dir.cwiseInverse();
      double best = inf;
      for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        if (boxes[mi].empty() || !boxes[mi].ray_hits(origin, inv, best)) continue;
        const TriangleMesh& m = meshes[mi];
        for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
          if (auto hit = ray_triangle(origin, dir, m.vertex(t, 0), m.vertex(t, 1), m.vertex(t, 2)))
            best = std::min(best, *hit);
      }
      if (best < inf) img.at(u, v) = best;
    }
  return img;
}

}  // namespace cadalign
