#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cadalign/error.hpp"
#include "cadalign/types.hpp"

namespace cadalign {

enum class GridKind : std::uint8_t { SignedDF = 0, UnsignedDF = 1, Heatmap = 2, Weight = 3 };

inline const char* to_string(GridKind kind) {
  switch (kind) {
    case GridKind::SignedDF: return "sdf";
    case GridKind::UnsignedDF: return "df";
    case GridKind::Heatmap: return "heatmap";
    case GridKind::Weight: return "weight";
  }
  return "unknown";
}

/// Dense scalar field on a regular lattice.
///
/// The value at integer index (i, j, k) belongs to the voxel center
/// origin + voxel_size * (i, j, k). Values are stored x-fastest. Values are
/// held in double precision in memory; the on-disk format stores float32.
struct VoxelGrid {
  Index3 dims = Index3::Zero();
  double voxel_size = 1.0;
  Vec3 origin = Vec3::Zero();
  double truncation = 0.0;  // meters, 0 = untruncated
  GridKind kind = GridKind::UnsignedDF;
  std::vector<double> values;

  static VoxelGrid filled(const Index3& dims, double voxel_size, const Vec3& origin,
                          double truncation, GridKind kind, double fill) {
    require(dims.minCoeff() >= 1, "grid dims must be positive");
    require(voxel_size > 0.0 && std::isfinite(voxel_size), "voxel_size must be positive");
    VoxelGrid g;
    g.dims = dims;
    g.voxel_size = voxel_size;
    g.origin = origin;
    g.truncation = truncation;
    g.kind = kind;
    g.values.assign(static_cast<std::size_t>(dims.x()) * dims.y() * dims.z(), fill);
    return g;
  }

  /// Same lattice placement, different kind and fill.
  VoxelGrid like(GridKind new_kind, double fill, double new_truncation = 0.0) const {
    return filled(dims, voxel_size, origin, new_truncation, new_kind, fill);
  }

  std::size_t size() const {
    return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.y()) * k);
  }

  Index3 unravel(std::size_t idx) const {
    const int i = static_cast<int>(idx % dims.x());
    const std::size_t rest = idx / dims.x();
    return {i, static_cast<int>(rest % dims.y()), static_cast<int>(rest / dims.y())};
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims.x() && j < dims.y() && k < dims.z();
  }

  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }

  Vec3 center(int i, int j, int k) const {
    return origin + voxel_size * Vec3(i, j, k);
  }
  Vec3 center(const Index3& ijk) const { return center(ijk.x(), ijk.y(), ijk.z()); }

  /// Continuous voxel coordinates of a world point.
  Vec3 to_voxel(const Vec3& world) const { return (world - origin) / voxel_size; }
  Vec3 to_world(const Vec3& vox) const { return origin + voxel_size * vox; }

  Transform world_to_voxel() const {
    return Transform::linear(Mat3::Identity() / voxel_size, -origin / voxel_size);
  }
  Transform voxel_to_world() const {
    return Transform::linear(Mat3::Identity() * voxel_size, origin);
  }

  /// Nearest voxel index for a world point (may be out of bounds).
  Index3 nearest_index(const Vec3& world) const {
    const Vec3 v = to_voxel(world);
    return {static_cast<int>(std::lround(v.x())), static_cast<int>(std::lround(v.y())),
            static_cast<int>(std::lround(v.z()))};
  }

  /// World-space extent spanned by voxel centers.
  Vec3 max_center() const { return center(dims - Index3::Ones()); }

  /// Value reported for look-ups that fall outside the lattice.
  double outside_value() const {
    switch (kind) {
      case GridKind::Heatmap:
      case GridKind::Weight: return 0.0;
      case GridKind::SignedDF:
      case GridKind::UnsignedDF:
        return truncation > 0.0 ? truncation : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  double max_value() const { return *std::max_element(values.begin(), values.end()); }

  /// Throws if the kind-specific value range is violated.
  void validate() const {
    require(dims.minCoeff() >= 1, "grid dims must be positive");
    require(values.size() == size(), "grid value count does not match dims");
    require(voxel_size > 0.0, "voxel_size must be positive");
    for (double v : values) {
      require(std::isfinite(v), "grid holds a non-finite value");
      switch (kind) {
        case GridKind::SignedDF:
          require(truncation <= 0.0 || std::abs(v) <= truncation + 1e-12,
                  "signed distance exceeds truncation");
          break;
        case GridKind::UnsignedDF:
        case GridKind::Weight: require(v >= 0.0, "distance or weight is negative"); break;
        case GridKind::Heatmap:
          require(v >= 0.0 && v <= 1.0, "heatmap value outside [0,1]");
          break;
      }
    }
  }
};

inline bool same_lattice(const VoxelGrid& a, const VoxelGrid& b) {
  return a.dims == b.dims && a.voxel_size == b.voxel_size && a.origin == b.origin;
}

struct GridSample {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();  // per meter
};

/// Trilinear interpolation with the analytic gradient of the interpolant.
/// Points outside the hull of voxel centers return outside_value() and a zero
/// gradient.
inline GridSample sample_trilinear(const VoxelGrid& grid, const Vec3& p_world) {
  Vec3 u = grid.to_voxel(p_world);
  constexpr double kSlack = 1e-9;  // absorbs round-off at the outermost centers
  int i0[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const int n = grid.dims[a];
    if (!(u[a] >= -kSlack && u[a] <= n - 1 + kSlack)) return {grid.outside_value(), Vec3::Zero()};
    u[a] = std::clamp(u[a], 0.0, static_cast<double>(n - 1));
    // snap round-off so that voxel centers return their stored value exactly
    if (const double r = std::round(u[a]); std::abs(u[a] - r) < kSlack) u[a] = r;
    if (n == 1) {
      i0[a] = 0;
      t[a] = 0.0;
      continue;
    }
    i0[a] = std::min(static_cast<int>(std::floor(u[a])), n - 2);
    t[a] = u[a] - i0[a];
  }
  const int dx = grid.dims.x() > 1 ? 1 : 0;
  const int dy = grid.dims.y() > 1 ? 1 : 0;
  const int dz = grid.dims.z() > 1 ? 1 : 0;
  auto v = [&](int a, int b, int c) {
    return grid.at(i0[0] + a * dx, i0[1] + b * dy, i0[2] + c * dz);
  };
  const double c000 = v(0, 0, 0), c100 = v(1, 0, 0), c010 = v(0, 1, 0), c110 = v(1, 1, 0);
  const double c001 = v(0, 0, 1), c101 = v(1, 0, 1), c011 = v(0, 1, 1), c111 = v(1, 1, 1);
  const double tx = t[0], ty = t[1], tz = t[2];

  const double c00 = c000 * (1 - tx) + c100 * tx;
  const double c10 = c010 * (1 - tx) + c110 * tx;
  const double c01 = c001 * (1 - tx) + c101 * tx;
  const double c11 = c011 * (1 - tx) + c111 * tx;
  const double c0 = c00 * (1 - ty) + c10 * ty;
  const double c1 = c01 * (1 - ty) + c11 * ty;

  GridSample s;
  s.value = c0 * (1 - tz) + c1 * tz;

  const double dx00 = c100 - c000, dx10 = c110 - c010, dx01 = c101 - c001, dx11 = c111 - c011;
  const double gx = ((dx00 * (1 - ty) + dx10 * ty) * (1 - tz) + (dx01 * (1 - ty) + dx11 * ty) * tz);
  const double gy = ((c10 - c00) * (1 - tz) + (c11 - c01) * tz);
  const double gz = c1 - c0;
  s.gradient = Vec3(dx ? gx : 0.0, dy ? gy : 0.0, dz ? gz : 0.0) / grid.voxel_size;
  return s;
}

/// Halves every dimension (ceil). Heatmaps are max-pooled over 2x2x2 blocks,
/// every other kind is mean-pooled. Voxel centers of the coarse grid sit at
/// the centroid of their block, so world positions are preserved.
inline VoxelGrid downsample(const VoxelGrid& fine) {
  Index3 cd;
  Vec3 shift;
  for (int a = 0; a < 3; ++a) {
    cd[a] = fine.dims[a] > 1 ? (fine.dims[a] + 1) / 2 : 1;
    shift[a] = fine.dims[a] > 1 ? 0.5 * fine.voxel_size : 0.0;
  }
  VoxelGrid coarse = VoxelGrid::filled(cd, 2.0 * fine.voxel_size, fine.origin + shift,
                                       fine.truncation, fine.kind, 0.0);
  const bool use_max = fine.kind == GridKind::Heatmap;
  for (int k = 0; k < cd.z(); ++k)
    for (int j = 0; j < cd.y(); ++j)
      for (int i = 0; i < cd.x(); ++i) {
        double acc = use_max ? -std::numeric_limits<double>::infinity() : 0.0;
        int count = 0;
        for (int c = 0; c < 2; ++c)
          for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) {
              const int fi = 2 * i + a, fj = 2 * j + b, fk = 2 * k + c;
              if (!fine.in_bounds(fi, fj, fk)) continue;
              if ((a && fine.dims.x() == 1) || (b && fine.dims.y() == 1) ||
                  (c && fine.dims.z() == 1))
                continue;
              const double v = fine.at(fi, fj, fk);
              acc = use_max ? std::max(acc, v) : acc + v;
              ++count;
            }
        coarse.at(i, j, k) = use_max ? acc : acc / count;
      }
  return coarse;
}

/// Multi-resolution pyramid ordered coarse to fine; the last entry is the
/// input grid itself.
inline std::vector<VoxelGrid> build_pyramid(const VoxelGrid& grid, int levels) {
  require(levels >= 1, "pyramid needs at least one level");
  std::vector<VoxelGrid> out;
  out.reserve(levels);
  out.push_back(grid);
  for (int l = 1; l < levels; ++l) out.push_back(downsample(out.back()));
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace cadalign
