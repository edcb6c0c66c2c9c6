#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cadalign/cad.hpp"
#include "cadalign/error.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/lm.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

struct Confidence {
  double c = 0.0;              // mean squared scan SDF over occupied CAD voxels, lower is better
  double seen_fraction = 0.0;  // share of occupied CAD voxels landing in observed space
};

/// Free-space agreement of a model-to-world pose with the scan. CAD voxels
/// closer than one voxel to the surface are carried into the scan; voxels
/// that land outside the scan or in unobserved space (SDF <= -tau) add 0.
inline Confidence confidence(const Transform& pose, const VoxelGrid& scan, const VoxelGrid& cad_df,
                             double tau = 0.15) {
  require(scan.kind == GridKind::SignedDF, "confidence needs a signed scan grid");
  require(tau > 0.0, "tau must be positive");
  const double occ = cad_df.voxel_size;
  long occupied = 0, seen = 0;
  double sum = 0.0;
  for (std::size_t idx = 0; idx < cad_df.size(); ++idx) {
    if (!(cad_df.values[idx] < occ)) continue;
    ++occupied;
    const Vec3 w = pose.apply(cad_df.center(cad_df.unravel(idx)));
    const Index3 v = scan.nearest_index(w);
    if (!scan.in_bounds(v.x(), v.y(), v.z())) continue;
    const double o = scan.at(v.x(), v.y(), v.z());
    if (!(o > -tau)) continue;
    ++seen;
    sum += o * o;
  }
  if (occupied == 0) fail(ErrorKind::Validation, "CAD grid has no occupied voxels");
  return {sum / occupied, double(seen) / occupied};
}

struct PruneConfig {
  double tau = 0.15;
  double min_seen_fraction = 0.3;
  double min_separation = 0.3;  // meters between kept translations
};

/// Scores every candidate, drops poorly observed ones, ranks by confidence
/// and suppresses candidates near a better-ranked survivor.
inline std::vector<AlignmentCandidate> prune(std::vector<AlignmentCandidate> candidates,
                                             const VoxelGrid& scan, const CadSet& cads,
                                             const PruneConfig& cfg = {}) {
  std::vector<AlignmentCandidate> seen;
  for (auto& cand : candidates) {
    auto it = cads.find(cand.cad_id);
    if (it == cads.end()) fail(ErrorKind::Validation, "candidate references unknown CAD '" + cand.cad_id + "'");
    const Confidence conf = confidence(cand.pose, scan, it->second.df, cfg.tau);
    cand.confidence = conf.c;
    cand.seen_fraction = conf.seen_fraction;
    if (conf.seen_fraction >= cfg.min_seen_fraction) seen.push_back(std::move(cand));
  }
  std::stable_sort(seen.begin(), seen.end(), [](const auto& a, const auto& b) {
    return a.confidence < b.confidence;
  });
  std::vector<AlignmentCandidate> kept;
  for (auto& cand : seen) {
    const Vec3 t = cand.pose.translation_part();
    bool near = false;
    for (const auto& k : kept)
      near = near || (k.pose.translation_part() - t).norm() < cfg.min_separation;
    if (!near) kept.push_back(std::move(cand));
  }
  return kept;
}

struct EvalConfig {
  double t_t = 0.20;  // meters
  double t_r = 20.0;  // degrees
  double t_s = 20.0;  // percent
  bool sort_by_confidence = false;

  void validate() const {
    require(t_t > 0.0 && t_r > 0.0 && t_s > 0.0, "evaluation thresholds must be positive");
  }
};

struct AlignedModel {
  std::string cad_id;
  std::string category;
  Transform pose;  // model to world
  double cost = 0.0;
  double confidence = std::numeric_limits<double>::quiet_NaN();
};

struct PoseErrors {
  double translation = std::numeric_limits<double>::quiet_NaN();
  double rotation = std::numeric_limits<double>::quiet_NaN();
  double scale = std::numeric_limits<double>::quiet_NaN();
};

struct Verdict {
  int candidate = 0;  // index into the evaluated list
  std::string cad_id;
  std::string category;
  bool correct = false;
  int gt_index = -1;  // matched entry, or closest same-category entry
  PoseErrors errors;
};

struct ClassScore {
  int correct = 0;
  int total = 0;
  double accuracy() const { return total > 0 ? 100.0 * correct / total : 0.0; }
};

struct EvalResult {
  std::map<std::string, ClassScore> per_class;
  double accuracy = 0.0;        // instance average
  double class_average = 0.0;
  int num_gt = 0;
  int num_correct = 0;
  bool empty = false;           // no ground truth
  std::vector<Verdict> verdicts;
};

inline std::optional<PoseErrors> pose_errors(const Transform& pred, const GroundTruthEntry& gt) {
  if (!(pred.linear_part().determinant() > 0.0)) return std::nullopt;
  Trs p, g;
  try {
    p = decompose(pred);
    g = decompose(gt.pose);
  } catch (const Error&) {
    return std::nullopt;
  }
  return PoseErrors{translation_error(p.translation, g.translation),
                    rotation_error(p.rotation, g.rotation, gt.sym),
                    scale_error(p.scale, g.scale)};
}

/// Greedy benchmark: each candidate, in order, consumes the first remaining
/// ground-truth entry of its category that it matches within all three
/// thresholds.
inline EvalResult evaluate(std::vector<AlignedModel> aligned, const std::vector<GroundTruthEntry>& gt,
                           const EvalConfig& cfg = {}) {
  cfg.validate();
  std::vector<int> order(aligned.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (cfg.sort_by_confidence)
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const double ca = aligned[a].confidence, cb = aligned[b].confidence;
      if (std::isnan(ca) || std::isnan(cb)) return !std::isnan(ca) && std::isnan(cb);
      return ca < cb;
    });

  EvalResult res;
  res.num_gt = static_cast<int>(gt.size());
  res.empty = gt.empty();
  for (const auto& e : gt) res.per_class[e.category].total += 1;
  std::vector<char> remaining(gt.size(), 1);

  for (int ci : order) {
    const AlignedModel& a = aligned[ci];
    Verdict v{ci, a.cad_id, a.category, false, -1, {}};
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (!remaining[g] || gt[g].category != a.category) continue;
      const auto err = pose_errors(a.pose, gt[g]);
      if (!err) continue;
      if (err->translation <= cfg.t_t && err->rotation <= cfg.t_r && err->scale <= cfg.t_s) {
        remaining[g] = 0;
        v.correct = true;
        v.gt_index = static_cast<int>(g);
        v.errors = *err;
        res.per_class[gt[g].category].correct += 1;
        res.num_correct += 1;
        break;
      }
      if (err->translation < closest) {
        closest = err->translation;
        v.gt_index = static_cast<int>(g);
        v.errors = *err;
      }
    }
    res.verdicts.push_back(std::move(v));
  }

  res.accuracy = res.num_gt > 0 ? 100.0 * res.num_correct / res.num_gt : 0.0;
  double sum = 0.0;
  for (const auto& [cat, score] : res.per_class) sum += score.accuracy();
  res.class_average = res.per_class.empty() ? 0.0 : sum / res.per_class.size();
  return res;
}

enum class SweepBlock { Translation, Rotation, Scale };

inline const char* to_string(SweepBlock b) {
  switch (b) {
    case SweepBlock::Translation: return "translation";
    case SweepBlock::Rotation: return "rotation";
    case SweepBlock::Scale: return "scale";
  }
  return "?";
}

inline SweepBlock sweep_block_from_string(const std::string& s) {
  if (s == "translation") return SweepBlock::Translation;
  if (s == "rotation") return SweepBlock::Rotation;
  if (s == "scale") return SweepBlock::Scale;
  fail(ErrorKind::Validation, "unknown sweep block '" + s + "' (translation|rotation|scale)");
}

struct SweepPoint {
  double threshold = 0.0;
  double accuracy = 0.0;
};

/// Accuracy as one threshold block varies, the other two held at `base`.
inline std::vector<SweepPoint> threshold_sweep(const std::vector<AlignedModel>& aligned,
                                               const std::vector<GroundTruthEntry>& gt,
                                               SweepBlock block,
                                               const std::vector<double>& thresholds,
                                               const EvalConfig& base = {}) {
  require(std::is_sorted(thresholds.begin(), thresholds.end()),
          "sweep thresholds must be sorted ascending");
  std::vector<SweepPoint> curve;
  for (double t : thresholds) {
    require(t >= 0.0, "sweep thresholds must be non-negative");
    EvalConfig cfg = base;
    double& slot = block == SweepBlock::Translation ? cfg.t_t
                   : block == SweepBlock::Rotation  ? cfg.t_r
                                                    : cfg.t_s;
    // evaluate() requires positive thresholds; a zero threshold only admits exact matches.
    slot = std::max(t, std::numeric_limits<double>::min());
    curve.push_back({t, evaluate(aligned, gt, cfg).accuracy});
  }
  return curve;
}

}  // namespace cadalign
