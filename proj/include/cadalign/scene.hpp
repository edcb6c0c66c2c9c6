#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cadalign/cad.hpp"
#include "cadalign/error.hpp"
#include "cadalign/fusion.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/keypoints.hpp"
#include "cadalign/obb.hpp"
#include "cadalign/procedural.hpp"
#include "cadalign/render.hpp"

namespace cadalign {

struct CadSpec {
  std::string id;
  Generator generator = Generator::Box;
  std::uint64_t seed = 0;
  SymmetryTag sym;
};

struct PlacedModel {
  std::string cad_id;
  std::string category;
  Transform pose;  // model to world
  SymmetryTag sym;
  std::vector<SurfacePair> keypoint_pairs;
};

struct SceneDescription {
  std::string scene_id;
  std::vector<CadSpec> cad_models;
  std::vector<PlacedModel> placed_models;
  std::string scan_path;  // relative to the scene file
};

struct SceneConfig {
  std::string scene_id = "scene";
  int models = 5;
  std::vector<Generator> generators{std::begin(kAllGenerators), std::end(kAllGenerators)};
  double extent = 0.0;  // meters; 0 picks a size from the model count
  double noise_sigma = 0.005;
  double voxel_size = 0.03;
  double truncation = 0.15;
  int image_width = 160;
  int image_height = 120;
  double focal = 120.0;
  int views = 32;
  double reuse_probability = 0.3;  // chance that an object reuses an earlier CAD
  double placement_margin = 0.1;
  int keypoint_pairs = 8;
  double occlude_below = -std::numeric_limits<double>::infinity();  // hide geometry below this height
  std::uint64_t seed = 0;

  double resolved_extent() const {
    return extent > 0.0 ? extent : 1.6 * std::sqrt(double(std::max(models, 1))) + 1.2;
  }
};

struct GeneratedScene {
  SceneDescription description;
  VoxelGrid scan;
  VoxelGrid weights;
  CadSet cads;
};

inline CadSet build_cads(const std::vector<CadSpec>& specs) {
  CadSet out;
  for (const auto& s : specs) {
    CadModel m = build_cad(s.id, s.generator, s.seed);
    m.sym = s.sym;
    out.emplace(s.id, std::move(m));
  }
  return out;
}

inline std::vector<GroundTruthEntry> ground_truth(const SceneDescription& d) {
  std::vector<GroundTruthEntry> gt;
  for (const auto& p : d.placed_models) gt.push_back({p.cad_id, p.category, p.pose, p.sym});
  return gt;
}

/// Camera poses spread evenly over a sphere around the scene center (a
/// Fibonacci lattice, so views from below the floor are included), far
/// enough away for the whole scene to fit in view.
inline std::vector<Transform> scene_cameras(double extent, int count, double half_fov) {
  std::vector<Transform> cams;
  const Vec3 target(0.0, 0.5, 0.0);
  const double radius = std::hypot(0.5 * extent, 0.5 * extent) + 0.3;
  const double dist = radius / std::sin(half_fov);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double y = 1.0 - 2.0 * (k + 0.5) / count;
    const double r = std::sqrt(1.0 - y * y);
    const Vec3 dir(r * std::cos(golden * k), y, r * std::sin(golden * k));
    cams.push_back(look_at(target + dist * dir, target));
  }
  return cams;
}

/// Random non-overlapping arrangement of procedural models resting on the
/// floor y = 0, rendered from synthetic cameras and fused into a TSDF scan.
inline GeneratedScene generate_scene(const SceneConfig& cfg) {
  require(cfg.models >= 0, "model count must be non-negative");
  require(!cfg.generators.empty() || cfg.models == 0, "no generators to choose from");
  require(cfg.noise_sigma >= 0.0, "noise sigma must be non-negative");
  require(cfg.voxel_size > 0.0 && cfg.truncation > 0.0, "voxel size and truncation must be positive");
  require(cfg.keypoint_pairs >= 6, "at least 6 keypoint pairs per model are required");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double extent = cfg.resolved_extent();

  GeneratedScene out;
  SceneDescription& desc = out.description;
  desc.scene_id = cfg.scene_id;

  std::vector<OrientedBox> boxes;
  std::vector<TriangleMesh> world_meshes;
  for (int i = 0; i < cfg.models; ++i) {
    const CadSpec* spec = nullptr;
    if (!desc.cad_models.empty() && u01(rng) < cfg.reuse_probability) {
      const auto k = static_cast<std::size_t>(u01(rng) * desc.cad_models.size());
      spec = &desc.cad_models[std::min(k, desc.cad_models.size() - 1)];
    } else {
      const auto k = static_cast<std::size_t>(u01(rng) * cfg.generators.size());
      const Generator g = cfg.generators[std::min(k, cfg.generators.size() - 1)];
      CadSpec s{std::string(to_string(g)) + "_" + std::to_string(desc.cad_models.size()), g,
                rng(), generator_symmetry(g)};
      desc.cad_models.push_back(s);
      out.cads.emplace(s.id, build_cad(s.id, s.generator, s.seed));
      spec = &desc.cad_models.back();
    }
    const CadModel& cad = out.cads.at(spec->id);

    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Vec3 s(0.8 + 0.4 * u01(rng), 0.8 + 0.4 * u01(rng), 0.8 + 0.4 * u01(rng));
      if (spec->sym.type == SymmetryType::C4 || spec->sym.type == SymmetryType::Cinf) s.z() = s.x();
      const double yaw = 2.0 * kPi * u01(rng);
      const double r = 0.5 * std::hypot(s.x(), s.z());
      const double half = 0.5 * extent - r;
      if (half <= 0.0) break;
      const Vec3 t((2.0 * u01(rng) - 1.0) * half, 0.5 * s.y(), (2.0 * u01(rng) - 1.0) * half);
      const Mat3 R = yaw_rotation(yaw);
      const OrientedBox grown =
          OrientedBox::from_center_size(t, s + Vec3::Constant(cfg.placement_margin), R);
      bool overlap = false;
      for (const auto& b : boxes) overlap = overlap || intersection_volume(grown, b) > 0.0;
      if (overlap) continue;
      boxes.push_back(grown);

      PlacedModel pm;
      pm.cad_id = spec->id;
      pm.category = cad.category;
      pm.pose = Transform::linear(R * s.asDiagonal(), t);
      pm.sym = spec->sym;
      std::vector<int> order(cad.mesh.vertices.size());
      for (std::size_t v = 0; v < order.size(); ++v) order[v] = static_cast<int>(v);
      for (std::size_t v = order.size(); v > 1; --v)
        std::swap(order[v - 1], order[static_cast<std::size_t>(u01(rng) * v) % v]);
      const int n = std::min<int>(cfg.keypoint_pairs, static_cast<int>(order.size()));
      for (int v = 0; v < n; ++v) {
        const Vec3 c = cad.mesh.vertices[order[v]];
        pm.keypoint_pairs.push_back({c, pm.pose.apply(c)});
      }
      world_meshes.push_back(cad.mesh.transformed(pm.pose));
      desc.placed_models.push_back(std::move(pm));
      placed = true;
    }
    if (!placed) fail(ErrorKind::Numerical, "scene placement exhausted after 1000 attempts; increase extent");
  }

  const double margin = 0.3;
  const double height = 1.2 + 2.0 * margin;
  const Index3 dims(static_cast<int>(std::ceil((extent + 2.0 * margin) / cfg.voxel_size)) + 1,
                    static_cast<int>(std::ceil(height / cfg.voxel_size)) + 1,
                    static_cast<int>(std::ceil((extent + 2.0 * margin) / cfg.voxel_size)) + 1);
  const Vec3 origin(-0.5 * extent - margin, -margin, -0.5 * extent - margin);
  auto [scan, weights] = make_tsdf_volume(dims, cfg.voxel_size, origin, cfg.truncation);

  std::vector<TriangleMesh> visible = world_meshes;
  if (std::isfinite(cfg.occlude_below))
    for (auto& m : visible) {
      std::vector<Index3> keep;
      for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
        const double top = std::max({m.vertex(t, 0).y(), m.vertex(t, 1).y(), m.vertex(t, 2).y()});
        if (top >= cfg.occlude_below) keep.push_back(m.triangles[t]);
      }
      m.triangles = std::move(keep);
    }

  std::mt19937_64 noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  if (!world_meshes.empty())
    for (const Transform& cam : scene_cameras(extent, cfg.views, std::atan2(0.5 * cfg.image_height, cfg.focal))) {
      DepthImage view = DepthImage::blank(cfg.image_width, cfg.image_height, cfg.focal, cfg.focal,
                                          0.5 * (cfg.image_width - 1),
                                          0.5 * (cfg.image_height - 1), cam);
      view = render_depth(visible, view);
      if (cfg.noise_sigma > 0.0)
        for (double& d : view.depth)
          if (d > 0.0) d = std::max(d + cfg.noise_sigma * noise(noise_rng), 1e-6);
      fuse_depth(scan, weights, view);
    }
  out.scan = std::move(scan);
  out.weights = std::move(weights);
  desc.scan_path = cfg.scene_id + ".vgrid";
  return out;
}

}  // namespace cadalign
