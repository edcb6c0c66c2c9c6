#include <gtest/gtest.h>

#include "common.hpp"

using namespace cadalign;
using namespace testutil;

namespace {

VoxelGrid affine_grid() {
  VoxelGrid g = VoxelGrid::filled({7, 6, 5}, 0.1, Vec3(-0.3, 0.2, 1.0), 0.0, GridKind::UnsignedDF, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 p = g.center(g.unravel(i));
    g.values[i] = 2 * p.x() + 3 * p.y() - p.z();
  }
  return g;
}

}  // namespace

TEST(VoxelGrid, ValueCountMatchesDims) {
  const VoxelGrid g = VoxelGrid::filled({3, 4, 5}, 0.03, Vec3::Zero(), 0.15, GridKind::SignedDF, 0.0);
  EXPECT_EQ(g.values.size(), 60u);
  g.validate();
}

TEST(VoxelGrid, WorldVoxelRoundTrip) {
  std::mt19937_64 rng(3);
  const VoxelGrid g = VoxelGrid::filled({8, 8, 8}, 0.037, Vec3(1.5, -2, 0.25), 0, GridKind::Heatmap, 0);
  const Mat4 id = (g.world_to_voxel() * g.voxel_to_world()).m;
  EXPECT_LT((id - Mat4::Identity()).norm(), 1e-12);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p = random_vec(rng, -5, 5);
    EXPECT_LT((g.to_world(g.to_voxel(p)) - p).norm(), 1e-12);
  }
}

TEST(VoxelGrid, ValidateRejectsOutOfRangeValues) {
  VoxelGrid s = VoxelGrid::filled({2, 2, 2}, 0.1, Vec3::Zero(), 0.15, GridKind::SignedDF, 0.0);
  s.values[3] = 0.2;
  EXPECT_THROW(s.validate(), Error);
  VoxelGrid h = s.like(GridKind::Heatmap, 0.5);
  h.values[0] = 1.5;
  EXPECT_THROW(h.validate(), Error);
}

TEST(Fusion, VoxelOnSurfaceReadsZero) {
  // 1x1 image, the single pixel ray is the camera z axis
  DepthImage img = camera(1, 1, 1.0, Transform::identity());
  img.depth[0] = 2.0;
  auto [g, w] = make_tsdf_volume({1, 1, 3}, 0.06, Vec3(0, 0, 1.94), 0.15);
  fuse_depth(g, w, img);
  EXPECT_NEAR(g.at(0, 0, 1), 0.0, 1e-12);
  EXPECT_NEAR(g.at(0, 0, 0), 0.06, 1e-12);  // camera side
  EXPECT_NEAR(g.at(0, 0, 2), -0.06, 1e-12);
  EXPECT_EQ(w.at(0, 0, 0), 1.0);
}

TEST(Fusion, FarBehindSurfaceIsUntouched) {
  DepthImage img = camera(1, 1, 1.0, Transform::identity());
  img.depth[0] = 1.0;
  auto [g, w] = make_tsdf_volume({1, 1, 1}, 0.1, Vec3(0, 0, 1.2), 0.15);
  fuse_depth(g, w, img);
  EXPECT_EQ(w.at(0, 0, 0), 0.0);
  EXPECT_EQ(g.at(0, 0, 0), -0.15);
}

TEST(Fusion, FarInFrontClampsToTruncation) {
  DepthImage img = camera(1, 1, 1.0, Transform::identity());
  img.depth[0] = 3.0;
  auto [g, w] = make_tsdf_volume({1, 1, 1}, 0.1, Vec3(0, 0, 1.0), 0.15);
  fuse_depth(g, w, img);
  EXPECT_EQ(g.at(0, 0, 0), 0.15);
}

TEST(Fusion, RunningAverageWithUnitWeights) {
  auto [g, w] = make_tsdf_volume({1, 1, 1}, 0.1, Vec3(0, 0, 2.0), 0.15);
  const double depths[] = {2.05, 1.98, 2.10};
  for (double d : depths) {
    DepthImage img = camera(1, 1, 1.0, Transform::identity());
    img.depth[0] = d;
    fuse_depth(g, w, img);
  }
  EXPECT_NEAR(g.at(0, 0, 0), (0.05 - 0.02 + 0.10) / 3.0, 1e-12);
  EXPECT_EQ(w.at(0, 0, 0), 3.0);
}

TEST(Fusion, Errors) {
  auto [g, w] = make_tsdf_volume({2, 2, 2}, 0.1, Vec3::Zero(), 0.15);
  VoxelGrid bad = VoxelGrid::filled({2, 2, 3}, 0.1, Vec3::Zero(), 0.0, GridKind::Weight, 0.0);
  DepthImage img = camera(4, 4, 4.0, Transform::translation(Vec3(0, 0, -1)));
  EXPECT_THROW(fuse_depth(g, bad, img), Error);
  DepthImage singular = camera(4, 4, 4.0, Transform::linear(Mat3::Zero()));
  try {
    fuse_depth(g, w, singular);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
  }
}

TEST(Fusion, SphereInteriorMatchesAnalyticDistance) {
  // The stored value is depth - z, so points behind the surface (inside the
  // sphere) are negative: radius 0.4 reads -0.10.
  const TriangleMesh sphere = make_sphere(Vec3::Zero(), 0.5, 24, 48);
  auto [g, w] = make_tsdf_volume(Index3::Constant(61), 0.03, Vec3::Constant(-0.9), 0.15);
  for (const auto& cam : sphere_cameras(64, 2.5, Vec3::Zero()))
    fuse_depth(g, w, render_depth({sphere}, camera(96, 96, 96.0, cam)));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 d = random_unit(rng);
    EXPECT_NEAR(sample_trilinear(g, 0.4 * d).value, -0.10, 0.03);
  }
}

TEST(Fusion, OrderInvariantForUnitWeights) {
  const TriangleMesh box = make_box(Vec3(-0.3, -0.2, -0.25), Vec3(0.3, 0.2, 0.25));
  std::vector<DepthImage> views;
  for (const auto& cam : sphere_cameras(5, 2.0, Vec3::Zero()))
    views.push_back(render_depth({box}, camera(40, 40, 40.0, cam)));
  auto [a, wa] = make_tsdf_volume(Index3::Constant(24), 0.04, Vec3::Constant(-0.46), 0.15);
  auto [b, wb] = make_tsdf_volume(Index3::Constant(24), 0.04, Vec3::Constant(-0.46), 0.15);
  for (int i : {0, 1, 2, 3, 4}) fuse_depth(a, wa, views[i]);
  for (int i : {3, 0, 4, 2, 1}) fuse_depth(b, wb, views[i]);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.values[i], b.values[i], 1e-9);
  EXPECT_EQ(wa.values, wb.values);
}

TEST(MeshToDf, CubeVertexAndCenter) {
  const TriangleMesh cube = make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5));
  const VoxelGrid df = mesh_to_df(cube, Index3::Constant(3), 0.0);
  EXPECT_LT((df.center(0, 0, 0) - Vec3::Constant(-0.5)).norm(), 1e-15);
  EXPECT_NEAR(df.at(0, 0, 0), 0.0, 1e-15);
  EXPECT_NEAR(df.at(1, 1, 1), 0.5, 1e-15);
  EXPECT_EQ(df.kind, GridKind::UnsignedDF);
}

TEST(MeshToDf, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  const TriangleMesh mesh = random_mesh(rng, 50);
  const VoxelGrid df = mesh_to_df(mesh, {12, 10, 9}, 0.2);
  std::uniform_int_distribution<std::size_t> pick(0, df.size() - 1);
  for (int i = 0; i < 20; ++i) {
    const std::size_t idx = pick(rng);
    EXPECT_NEAR(df.values[idx], mesh_dist_oracle(mesh, df.center(df.unravel(idx))), 1e-9);
  }
}

TEST(MeshToDf, BoundsArePaddedAabb) {
  const TriangleMesh cube = make_box(Vec3(0, 0, 0), Vec3(1, 2, 1));
  const VoxelGrid df = mesh_to_df(cube, Index3::Constant(32), 0.15);
  EXPECT_NEAR(df.center(0, 0, 0).y(), -0.15, 1e-12);
  EXPECT_NEAR(df.max_center().y(), 2.15, 1e-12);
}

TEST(MeshToDf, RigidMotionInvariance) {
  std::mt19937_64 rng(5);
  const TriangleMesh mesh = random_mesh(rng, 30);
  const Transform T = Transform::linear(random_rotation(rng), random_vec(rng, -2, 2));
  const TriangleMesh moved = mesh.transformed(T);
  const VoxelGrid df = mesh_to_df(mesh, Index3::Constant(10), 0.1);
  for (std::size_t i = 0; i < df.size(); i += 7) {
    const Vec3 p = df.center(df.unravel(i));
    EXPECT_NEAR(df.values[i], mesh_distance(moved, T.apply(p)), 1e-7);
  }
}

TEST(MeshToDf, EmptyMeshFails) {
  EXPECT_THROW(mesh_to_df(TriangleMesh{}, Index3::Constant(4), 0.1), Error);
}

TEST(Trilinear, VoxelCenterIsExact) {
  std::mt19937_64 rng(2);
  VoxelGrid g = VoxelGrid::filled({5, 4, 3}, 0.07, Vec3(0.1, 0.2, 0.3), 0, GridKind::UnsignedDF, 0);
  for (double& v : g.values) v = std::uniform_real_distribution<double>(0, 1)(rng);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_DOUBLE_EQ(sample_trilinear(g, g.center(g.unravel(i))).value, g.values[i]);
}

TEST(Trilinear, MidpointOfTwoVoxels) {
  VoxelGrid g = VoxelGrid::filled({2, 1, 1}, 0.5, Vec3::Zero(), 0, GridKind::Heatmap, 0);
  g.values = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(sample_trilinear(g, Vec3(0.25, 0, 0)).value, 0.5);
}

TEST(Trilinear, AffineFieldGradient) {
  const VoxelGrid g = affine_grid();
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vec3 u = random_vec(rng, 0, 1).cwiseProduct((g.dims - Index3::Ones()).cast<double>());
    const Vec3 p = g.to_world(u);
    const GridSample s = sample_trilinear(g, p);
    EXPECT_LT((s.gradient - Vec3(2, 3, -1)).norm(), 1e-9);
    EXPECT_NEAR(s.value, 2 * p.x() + 3 * p.y() - p.z(), 1e-9);
  }
}

TEST(Trilinear, OutsideValues) {
  VoxelGrid h = VoxelGrid::filled({4, 4, 4}, 0.1, Vec3::Zero(), 0, GridKind::Heatmap, 0.7);
  const GridSample a = sample_trilinear(h, Vec3(-1, 0, 0));
  EXPECT_EQ(a.value, 0.0);
  EXPECT_EQ(a.gradient, Vec3::Zero());
  VoxelGrid s = h.like(GridKind::SignedDF, 0.0, 0.15);
  const GridSample b = sample_trilinear(s, Vec3(0.1, 5, 0.1));
  EXPECT_EQ(b.value, 0.15);
  EXPECT_EQ(b.gradient, Vec3::Zero());
  VoxelGrid u = h.like(GridKind::UnsignedDF, 0.0, 0.2);
  EXPECT_EQ(sample_trilinear(u, Vec3(0.1, 0.1, 9)).value, 0.2);
}

TEST(Trilinear, GradientMatchesFiniteDifferences) {
  VoxelGrid g = VoxelGrid::filled({12, 12, 12}, 0.1, Vec3::Zero(), 0, GridKind::UnsignedDF, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 p = g.center(g.unravel(i));
    g.values[i] = 2.0 + std::sin(3 * p.x()) * std::cos(2 * p.y()) + p.z() * p.z();
  }
  std::mt19937_64 rng(4);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 1000) {
    const Vec3 u = random_vec(rng, 0.5, 10.5);
    // the interpolant is only differentiable away from cell faces
    const Vec3 frac = u - u.array().floor().matrix();
    if ((frac.array() < 2 * h / g.voxel_size).any() || (frac.array() > 1 - 2 * h / g.voxel_size).any())
      continue;
    const Vec3 p = g.to_world(u);
    const Vec3 grad = sample_trilinear(g, p).gradient;
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      const double fd = (sample_trilinear(g, p + e).value - sample_trilinear(g, p - e).value) / (2 * h);
      EXPECT_LE(std::abs(fd - grad[a]), 1e-4 * std::max(1.0, std::abs(grad[a])));
    }
    ++checked;
  }
}

TEST(Pyramid, SingleLevelIsIdentity) {
  const VoxelGrid g = affine_grid();
  const auto p = build_pyramid(g, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].values, g.values);
  EXPECT_EQ(p[0].origin, g.origin);
}

TEST(Pyramid, SinglePeakSurvivesMaxPooling) {
  VoxelGrid g = VoxelGrid::filled(Index3::Constant(4), 0.1, Vec3::Zero(), 0, GridKind::Heatmap, 0);
  g.at(3, 0, 2) = 1.0;
  const auto p = build_pyramid(g, 2);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].dims, Index3::Constant(2));
  EXPECT_EQ(p[0].at(1, 0, 1), 1.0);
  EXPECT_EQ(std::count(p[0].values.begin(), p[0].values.end(), 1.0), 1);
}

TEST(Pyramid, CoarseVoxelIsBlockMax) {
  std::mt19937_64 rng(6);
  VoxelGrid g = VoxelGrid::filled(Index3::Constant(32), 0.05, Vec3(0.3, 0, -1), 0, GridKind::Heatmap, 0);
  for (double& v : g.values) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const auto p = build_pyramid(g, 3);
  ASSERT_EQ(p.size(), 3u);
  const VoxelGrid& mid = p[1];
  EXPECT_EQ(mid.dims, Index3::Constant(16));
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        double m = 0;
        for (int c = 0; c < 8; ++c) m = std::max(m, g.at(2 * i + (c & 1), 2 * j + (c >> 1 & 1), 2 * k + (c >> 2)));
        ASSERT_EQ(mid.at(i, j, k), m);
        // coarse centers sit at the block centroid
        ASSERT_LT((mid.center(i, j, k) - 0.5 * (g.center(2 * i, 2 * j, 2 * k) + g.center(2 * i + 1, 2 * j + 1, 2 * k + 1))).norm(), 1e-12);
      }
  for (const auto& level : p) EXPECT_EQ(level.max_value(), g.max_value());
}

TEST(Pyramid, DistanceFieldsAreMeanPooled) {
  const VoxelGrid g = affine_grid();
  const auto p = build_pyramid(g, 2);
  // the mean of an affine field over a full block is its value at the centroid
  const VoxelGrid& c = p[0];
  const Vec3 q = c.center(1, 1, 1);
  EXPECT_NEAR(c.at(1, 1, 1), 2 * q.x() + 3 * q.y() - q.z(), 1e-12);
}

TEST(Pyramid, RejectsZeroLevels) { EXPECT_THROW(build_pyramid(affine_grid(), 0), Error); }
