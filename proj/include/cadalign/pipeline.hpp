#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "cadalign/benchmark.hpp"
#include "cadalign/cad.hpp"
#include "cadalign/correspond.hpp"
#include "cadalign/keypoints.hpp"
#include "cadalign/lm.hpp"

namespace cadalign {

/// Runs fn(0..n-1) on up to `jobs` threads. Each index is handled exactly
/// once; callers write results into per-index slots so output order does
/// not depend on scheduling.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline HarrisParams pipeline_harris() {
  HarrisParams h;
  h.nms_radius = 0.15;  // sparser keypoints keep the solver affordable
  return h;
}

struct PipelineConfig {
  HarrisParams harris = pipeline_harris();
  OracleParams oracle;
  double lambda_s = 0.01;
  int pyramid_levels = 3;
  SolverConfig solver;
  double inlier_value = 0.5;  // heatmap value that counts a pair as explained
  int min_inliers = 4;        // pairs a candidate must explain that no cheaper one did
  double min_new_fraction = 0.5;
  double max_scale_deviation = 0.5;  // relative to the inliers' predicted scale
  PruneConfig prune;
  EvalConfig eval;
  int jobs = 1;
};

/// Flags of the pairs whose heatmap reads above `threshold` at the pose.
inline std::vector<bool> inlier_mask(const AlignmentProblem& problem, const Transform& pose,
                                     double threshold) {
  std::vector<bool> mask(problem.pairs.size(), false);
  if (!pose.is_invertible()) return mask;
  const Transform inv = pose.inverse();
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const auto& p = problem.pairs[j];
    mask[j] = sample_trilinear(*p.heatmap.grid, inv.apply(p.scan_point)).value > threshold;
  }
  return mask;
}

inline int count_inliers(const AlignmentProblem& problem, const Transform& pose, double threshold) {
  const auto mask = inlier_mask(problem, pose, threshold);
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

/// Greedy explanation in cost order: a candidate survives when it explains
/// at least `min_inliers` pairs that no cheaper survivor explains, and those
/// make up at least `min_new_fraction` of its inliers. Shrunken or partial
/// fits of an already explained object fail the test, and so do fits whose
/// scale strays from the scale predicted for the inliers.
inline std::vector<AlignmentCandidate> select_explaining(const AlignmentProblem& problem,
                                                         std::vector<AlignmentCandidate> cands,
                                                         const PipelineConfig& cfg) {
  std::vector<bool> taken(problem.pairs.size(), false);
  std::vector<AlignmentCandidate> out;
  for (auto& c : cands) {
    if (!(c.params.s.minCoeff() > 0.0)) continue;
    const auto mask = inlier_mask(problem, c.pose, cfg.inlier_value);
    int inl = 0, fresh = 0;
    Vec3 pred = Vec3::Zero();
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j]) {
        ++inl;
        fresh += !taken[j];
        pred += problem.pairs[j].scale_pred;
      }
    if (fresh < cfg.min_inliers || fresh < cfg.min_new_fraction * inl) continue;
    pred /= inl;
    const Vec3 ratio = c.params.s.cwiseQuotient(pred);
    if ((ratio.array() - 1.0).abs().maxCoeff() > cfg.max_scale_deviation) continue;
    for (std::size_t j = 0; j < mask.size(); ++j) taken[j] = taken[j] || mask[j];
    out.push_back(std::move(c));
  }
  return out;
}

/// Groups filtered pairs by CAD, runs the multi-restart solver per CAD and
/// keeps the candidates that explain pairs on their own.
inline std::vector<AlignmentCandidate> align_pairs_by_cad(
    const std::vector<CorrespondencePair>& filtered, const CadSet& cads, const PipelineConfig& cfg) {
  std::map<std::string, AlignmentProblem> problems;
  for (const auto& p : filtered) {
    auto& prob = problems[p.cad_id];
    prob.cad_id = p.cad_id;
    prob.lambda_s = cfg.lambda_s;
    prob.pyramid_levels = cfg.pyramid_levels;
    if (auto it = cads.find(p.cad_id); it != cads.end()) prob.sym = it->second.sym;
    prob.pairs.push_back(p);
  }
  std::vector<const AlignmentProblem*> list;
  for (const auto& [id, prob] : problems) list.push_back(&prob);
  std::vector<std::vector<AlignmentCandidate>> per(list.size());
  parallel_for(static_cast<int>(list.size()), cfg.jobs, [&](int i) {
    per[i] = select_explaining(*list[i], align_multi(*list[i], cfg.solver), cfg);
  });
  std::vector<AlignmentCandidate> out;
  for (auto& v : per)
    for (auto& c : v) out.push_back(std::move(c));
  return out;
}

struct SceneResult {
  std::vector<Keypoint> keypoints;
  std::vector<CorrespondencePair> pairs;
  std::vector<CorrespondencePair> filtered;
  std::vector<AlignmentCandidate> candidates;
  std::vector<AlignmentCandidate> kept;
  std::vector<AlignedModel> aligned;
  EvalResult eval;
};

inline std::vector<Vec3> positions(const std::vector<Keypoint>& kps) {
  std::vector<Vec3> out;
  for (const auto& k : kps) out.push_back(k.position);
  return out;
}

/// Keypoints, oracle correspondences, filtering, alignment, pruning and
/// evaluation for one scan.
inline SceneResult run_pipeline(const VoxelGrid& scan, const CadSet& cads,
                                const std::vector<GroundTruthEntry>& gt, const PipelineConfig& cfg) {
  SceneResult r;
  r.keypoints = detect_harris(scan, cfg.harris);
  r.pairs = oracle_correspondences(positions(r.keypoints), gt, cads, cfg.oracle);
  r.filtered = filter_correspondences(r.pairs);
  r.candidates = align_pairs_by_cad(r.filtered, cads, cfg);
  r.kept = prune(r.candidates, scan, cads, cfg.prune);
  for (const auto& c : r.kept) {
    const auto& cad = cads.at(c.cad_id);
    r.aligned.push_back({c.cad_id, cad.category, c.pose, c.cost, c.confidence});
  }
  r.eval = evaluate(r.aligned, gt, cfg.eval);
  return r;
}

/// Pools per-scene verdict counts into one benchmark result.
inline EvalResult merge_results(const std::vector<EvalResult>& results) {
  EvalResult m;
  for (const auto& r : results) {
    for (const auto& [cat, s] : r.per_class) {
      m.per_class[cat].correct += s.correct;
      m.per_class[cat].total += s.total;
    }
    m.num_gt += r.num_gt;
    m.num_correct += r.num_correct;
  }
  m.empty = m.num_gt == 0;
  m.accuracy = m.num_gt > 0 ? 100.0 * m.num_correct / m.num_gt : 0.0;
  double sum = 0.0;
  for (const auto& [cat, s] : m.per_class) sum += s.accuracy();
  m.class_average = m.per_class.empty() ? 0.0 : sum / m.per_class.size();
  return m;
}

}  // namespace cadalign
