#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cadalign/cad.hpp"
#include "cadalign/error.hpp"
#include "cadalign/heatmap.hpp"
#include "cadalign/keypoints.hpp"

namespace cadalign {

/// A scan point bound to one CAD model through its correspondence heatmap.
struct CorrespondencePair {
  Vec3 scan_point = Vec3::Zero();
  std::string cad_id;
  Heatmap heatmap;
  double compatibility = 0.0;
  Vec3 scale_pred = Vec3::Ones();
};

struct OtsuResult {
  double threshold = 0.0;
  bool degenerate = false;
};

inline constexpr int kOtsuBins = 256;

inline int otsu_bin(double score) {
  return std::clamp(static_cast<int>(std::floor(score * kOtsuBins)), 0, kOtsuBins - 1);
}

/// Otsu's threshold on a 256-bin histogram of [0,1] scores. The returned
/// value is the upper edge of the last bin of the lower class; ties go to
/// the lower threshold.
inline OtsuResult otsu_threshold(const std::vector<double>& scores) {
  require(scores.size() >= 2, "Otsu thresholding needs at least 2 scores");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  if (*mn == *mx) return {*mn, true};

  std::vector<double> hist(kOtsuBins, 0.0);
  for (double s : scores) hist[otsu_bin(s)] += 1.0;
  const double n = static_cast<double>(scores.size());
  double total_mean = 0.0;
  for (int b = 0; b < kOtsuBins; ++b) total_mean += (b + 0.5) / kOtsuBins * hist[b];
  total_mean /= n;

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b + 1 < kOtsuBins; ++b) {
    w0 += hist[b] / n;
    sum0 += (b + 0.5) / kOtsuBins * hist[b] / n;
    const double w1 = 1.0 - w0;
    if (w0 <= 0.0 || w1 <= 1e-15) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_mean - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best * (1.0 + 1e-12) + 1e-300) {
      best = between;
      best_bin = b;
    }
  }
  return {(best_bin + 1.0) / kOtsuBins, false};
}

/// Keeps pairs whose compatibility exceeds the Otsu threshold of all scores.
/// When every score is identical the set is kept whole if that score is
/// above 0.5 and dropped otherwise.
inline std::vector<CorrespondencePair> filter_correspondences(
    const std::vector<CorrespondencePair>& pairs) {
  if (pairs.empty()) return {};
  std::vector<double> scores;
  for (const auto& p : pairs) scores.push_back(p.compatibility);
  if (scores.size() < 2) {
    return scores[0] > 0.5 ? pairs : std::vector<CorrespondencePair>{};
  }
  const OtsuResult otsu = otsu_threshold(scores);
  std::vector<CorrespondencePair> kept;
  for (const auto& p : pairs) {
    const bool keep = otsu.degenerate ? p.compatibility > 0.5 : p.compatibility > otsu.threshold;
    if (keep) kept.push_back(p);
  }
  return kept;
}

struct OracleParams {
  double sigma = 2.0;          // heatmap blur, voxels
  double match_radius = 0.09;  // scan keypoint to GT surface, meters
};

/// Correspondence provider that stands in for the learned predictor: every
/// (keypoint, CAD) pair is emitted; keypoints near the surface of a placed
/// instance of that CAD get a symmetry-aware target heatmap at the
/// inverse-mapped location, compatibility 1 and the ground-truth scale.
inline std::vector<CorrespondencePair> oracle_correspondences(
    const std::vector<Vec3>& scan_keypoints, const std::vector<GroundTruthEntry>& gt,
    const CadSet& cads, const OracleParams& params = {}) {
  struct Instance {
    const GroundTruthEntry* entry;
    TriangleMesh world_mesh;
    Aabb box;
    Transform inverse;
    Vec3 scale;
  };
  std::map<std::string, std::vector<Instance>> by_cad;
  for (const auto& e : gt) {
    auto it = cads.find(e.cad_id);
    if (it == cads.end()) fail(ErrorKind::Validation, "ground truth references unknown CAD '" + e.cad_id + "'");
    if (!e.pose.is_invertible()) fail(ErrorKind::Validation, "ground-truth pose is not invertible");
    Instance inst{&e, it->second.mesh.transformed(e.pose), {}, e.pose.inverse(),
                  decompose(e.pose).scale};
    inst.box = inst.world_mesh.bounds();
    by_cad[e.cad_id].push_back(std::move(inst));
  }

  std::map<std::string, std::shared_ptr<const VoxelGrid>> zero_maps;
  for (const auto& [id, cad] : cads)
    zero_maps[id] = std::make_shared<const VoxelGrid>(cad.df.like(GridKind::Heatmap, 0.0));

  const double r2 = params.match_radius * params.match_radius;
  std::vector<CorrespondencePair> out;
  for (const Vec3& p : scan_keypoints) {
    for (const auto& [id, cad] : cads) {
      CorrespondencePair pair;
      pair.scan_point = p;
      pair.cad_id = id;
      pair.heatmap = {zero_maps.at(id), id};
      pair.compatibility = 0.0;

      const Instance* best = nullptr;
      double best_d = std::numeric_limits<double>::infinity();
      if (auto it = by_cad.find(id); it != by_cad.end()) {
        for (const auto& inst : it->second) {
          if (inst.box.squared_distance(p) > r2) continue;
          const double d = mesh_distance(inst.world_mesh, p);
          if (d <= params.match_radius && d < best_d) {
            best_d = d;
            best = &inst;
          }
        }
      }
      if (best) {
        const Vec3 q = best->inverse.apply(p);
        pair.heatmap.grid = std::make_shared<const VoxelGrid>(
            make_target_heatmap(cad.df, q, best->entry->sym, params.sigma));
        pair.compatibility = 1.0;
        pair.scale_pred = best->scale;
      }
      out.push_back(std::move(pair));
    }
  }
  return out;
}

enum class Polarity { Positive, NegativeRandom, NegativeHard };

inline const char* to_string(Polarity p) {
  switch (p) {
    case Polarity::Positive: return "positive";
    case Polarity::NegativeRandom: return "negative_random";
    case Polarity::NegativeHard: return "negative_hard";
  }
  return "positive";
}

struct TrainingSample {
  VoxelGrid scan_crop;       // signed distance, 64^3, centered on the scan point
  std::string cad_id;
  VoxelGrid cad_df;          // unsigned distance, 32^3
  VoxelGrid target_heatmap;  // all zero for negatives
  int compat_label = 0;
  Vec3 scale_label = Vec3::Ones();
  Polarity polarity = Polarity::Positive;
  Vec3 scan_point = Vec3::Zero();
  Vec3 cad_point = Vec3::Zero();
};

struct SampleSetConfig {
  int augmentation_factor = 10;
  double blur_sigma = 2.0;
  int crop_dim = 64;
  double reject_dist = 0.03;
  std::uint64_t seed = 0;
};

/// A scene as seen by the training-data generator.
struct TrainingScene {
  const VoxelGrid* scan = nullptr;
  std::vector<GroundTruthEntry> gt;
  std::vector<std::vector<SurfacePair>> annotated;  // per gt entry
};

/// Cube of `dim` scan voxels around the voxel nearest to `center`; voxels
/// outside the scan read as unseen (-truncation).
inline VoxelGrid crop_scan(const VoxelGrid& scan, const Vec3& center, int dim) {
  const Index3 c = scan.nearest_index(center);
  const Index3 lo = c - Index3::Constant(dim / 2);
  VoxelGrid crop = VoxelGrid::filled(Index3::Constant(dim), scan.voxel_size, scan.center(lo),
                                     scan.truncation, scan.kind, -scan.truncation);
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) {
        const Index3 s = lo + Index3(i, j, k);
        if (scan.in_bounds(s.x(), s.y(), s.z())) crop.at(i, j, k) = scan.at(s.x(), s.y(), s.z());
      }
  return crop;
}

/// Positives are the annotated pairs plus augmentation_factor times as many
/// surface samples; random and hard negatives each match the positive count.
inline std::vector<TrainingSample> generate_training_samples(
    const std::vector<TrainingScene>& scenes, const CadSet& cads, const SampleSetConfig& cfg) {
  require(!cads.empty(), "training-sample generation needs a CAD set");
  std::vector<TrainingSample> out;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const TrainingScene& scene = scenes[si];
    require(scene.scan != nullptr, "training scene has no scan grid");
    if (scene.gt.empty()) fail(ErrorKind::Validation, "training scene has no aligned model");
    require(scene.annotated.size() == scene.gt.size(),
            "training scene needs one annotation list per aligned model");
    std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (si + 1)));

    struct Pos {
      std::size_t entry;
      SurfacePair pair;
    };
    std::vector<Pos> positives;
    for (std::size_t e = 0; e < scene.gt.size(); ++e) {
      for (const auto& sp : scene.annotated[e]) positives.push_back({e, sp});
      const int extra = cfg.augmentation_factor * static_cast<int>(scene.annotated[e].size());
      if (extra == 0) continue;
      const auto& cad = cads.at(scene.gt[e].cad_id);
      for (const auto& sp : sample_surface_pairs(cad.mesh, *scene.scan, scene.gt[e].pose, extra,
                                                 cfg.reject_dist, rng()))
        positives.push_back({e, sp});
    }

    for (const auto& pos : positives) {
      const auto& entry = scene.gt[pos.entry];
      const auto& cad = cads.at(entry.cad_id);
      TrainingSample s;
      s.scan_crop = crop_scan(*scene.scan, pos.pair.scan_point, cfg.crop_dim);
      s.cad_id = entry.cad_id;
      s.cad_df = cad.df;
      s.target_heatmap = make_target_heatmap(cad.df, pos.pair.cad_point, entry.sym, cfg.blur_sigma);
      s.compat_label = 1;
      s.scale_label = decompose(entry.pose).scale;
      s.polarity = Polarity::Positive;
      s.scan_point = pos.pair.scan_point;
      s.cad_point = pos.pair.cad_point;
      out.push_back(std::move(s));
    }

    std::vector<const CadModel*> cad_list;
    for (const auto& [id, cad] : cads) cad_list.push_back(&cad);
    std::uniform_int_distribution<int> pick_cad(0, static_cast<int>(cad_list.size()) - 1);
    std::uniform_int_distribution<int> vx(0, scene.scan->dims.x() - 1), vy(0, scene.scan->dims.y() - 1),
        vz(0, scene.scan->dims.z() - 1);
    for (std::size_t n = 0; n < positives.size(); ++n) {
      const CadModel& cad = *cad_list[pick_cad(rng)];
      const Vec3 p = scene.scan->center(vx(rng), vy(rng), vz(rng));
      TrainingSample s;
      s.scan_crop = crop_scan(*scene.scan, p, cfg.crop_dim);
      s.cad_id = cad.id;
      s.cad_df = cad.df;
      s.target_heatmap = cad.df.like(GridKind::Heatmap, 0.0);
      s.polarity = Polarity::NegativeRandom;
      s.scan_point = p;
      out.push_back(std::move(s));
    }

    std::uniform_int_distribution<std::size_t> pick_pos(0, positives.size() - 1);
    for (std::size_t n = 0; n < positives.size(); ++n) {
      const auto& pos = positives[pick_pos(rng)];
      const std::string& category = scene.gt[pos.entry].category;
      std::vector<const CadModel*> other;
      for (const auto* c : cad_list)
        if (c->category != category) other.push_back(c);
      if (other.empty())
        fail(ErrorKind::Validation, "hard negatives need a CAD of a category other than '" + category + "'");
      std::uniform_int_distribution<int> pick_other(0, static_cast<int>(other.size()) - 1);
      const CadModel& cad = *other[pick_other(rng)];
      TrainingSample s;
      s.scan_crop = crop_scan(*scene.scan, pos.pair.scan_point, cfg.crop_dim);
      s.cad_id = cad.id;
      s.cad_df = cad.df;
      s.target_heatmap = cad.df.like(GridKind::Heatmap, 0.0);
      s.polarity = Polarity::NegativeHard;
      s.scan_point = pos.pair.scan_point;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace cadalign
