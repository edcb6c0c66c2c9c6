#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "cadalign/correspond.hpp"
#include "cadalign/error.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

/// Heatmap alignment of one CAD model: minimize
///   sum_j (1 - H_j(c_vox,j))^2 + lambda_s * |s|^2
/// over a 9DoF model-to-world pose P = psi(a, s), where c_vox,j is scan point
/// p_j carried into the CAD voxel grid by P^-1.
struct AlignmentProblem {
  std::string cad_id;
  std::vector<CorrespondencePair> pairs;
  double lambda_s = 0.01;
  int pyramid_levels = 3;
  SymmetryTag sym;  // of the CAD model; narrows the yaw fan

  void validate() const {
    require(!pairs.empty(), "alignment problem has no correspondence pairs");
    require(lambda_s >= 0.0, "lambda_s must be non-negative");
    require(pyramid_levels >= 1, "pyramid_levels must be at least 1");
    for (const auto& p : pairs) require(p.heatmap.grid != nullptr, "pair without heatmap");
  }
};

struct SolverConfig {
  int max_iterations = 100;  // per pyramid level
  double damping_init = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double damping_max = 1e10;
  double convergence_tol = 1e-9;
  std::vector<Vec3> restarts;             // translation initializations
  std::vector<PoseParams> initial_poses;  // full initializations, override restarts
  int yaw_fan = 4;                        // yaw initializations per restart
  double jitter_step = 0.15;              // meters; 3x3x3 jitter around cluster centers
  double cluster_radius = 1.0;            // meters
  double dedup_translation = 0.1;
  double dedup_rotation_deg = 5.0;
  double dedup_scale_pct = 5.0;
  bool record_trace = false;
  std::uint64_t seed = 0;
};

struct TraceRow {
  int iteration = 0;
  int level = 0;
  double cost = 0.0;
  double damping = 0.0;
};

struct AlignmentCandidate {
  std::string cad_id;
  Transform pose;  // model to world
  PoseParams params;
  double cost = 0.0;
  double confidence = std::numeric_limits<double>::quiet_NaN();
  double seen_fraction = std::numeric_limits<double>::quiet_NaN();
  int accepted_steps = 0;
  bool damping_ceiling = false;
  int restart_index = 0;
  std::vector<TraceRow> trace;
};

namespace detail {

// P = [R t] * diag(s). Rigid updates are left-multiplied increments.
struct PoseState {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 s = Vec3::Ones();

  static PoseState from_params(const PoseParams& p) {
    const Mat4 g = exp_se3(p.a);
    return {g.block<3, 3>(0, 0), g.block<3, 1>(0, 3), p.s};
  }

  PoseState incremented(const Vec9& d) const {
    const Mat4 e = exp_se3(d.head<6>());
    const Mat3 Re = e.block<3, 3>(0, 0);
    return {Re * R, Re * t + e.block<3, 1>(0, 3), s + d.tail<3>()};
  }

  Transform matrix() const { return Transform::linear(R * s.asDiagonal(), t); }

  PoseParams params() const {
    Mat4 g = Mat4::Identity();
    g.block<3, 3>(0, 0) = R;
    g.block<3, 1>(0, 3) = t;
    return {log_se3(g), s};
  }
};

}  // namespace detail

/// Heatmaps of every pair resampled into a coarse-to-fine pyramid.
class PreparedProblem {
 public:
  explicit PreparedProblem(const AlignmentProblem& problem) : problem_(&problem) {
    problem.validate();
    std::map<const VoxelGrid*, std::vector<std::shared_ptr<const VoxelGrid>>> cache;
    for (const auto& pair : problem.pairs) {
      const VoxelGrid* key = pair.heatmap.grid.get();
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::vector<std::shared_ptr<const VoxelGrid>> lv;
        auto grids = build_pyramid(*pair.heatmap.grid, problem.pyramid_levels);
        for (std::size_t l = 0; l + 1 < grids.size(); ++l)
          lv.push_back(std::make_shared<const VoxelGrid>(std::move(grids[l])));
        lv.push_back(pair.heatmap.grid);
        it = cache.emplace(key, std::move(lv)).first;
      }
      levels_.push_back(it->second);
    }
  }

  const AlignmentProblem& problem() const { return *problem_; }
  int num_levels() const { return problem_->pyramid_levels; }
  int finest() const { return num_levels() - 1; }
  int num_pairs() const { return static_cast<int>(levels_.size()); }
  int num_residuals() const { return num_pairs() + (problem_->lambda_s > 0.0 ? 3 : 0); }
  const VoxelGrid& heatmap(int pair, int level) const { return *levels_[pair][level]; }

 private:
  const AlignmentProblem* problem_;
  std::vector<std::vector<std::shared_ptr<const VoxelGrid>>> levels_;
};

namespace detail {

// Residuals and, if requested, the Jacobian w.r.t. the increment
// (omega, v, ds) at zero. Returns the cost; +inf for non-positive scales.
inline double evaluate(const PreparedProblem& pp, const PoseState& x, int level,
                       Eigen::VectorXd* r, Eigen::MatrixXd* J) {
  const int n = pp.num_pairs();
  const double lambda = pp.problem().lambda_s;
  const int m = pp.num_residuals();
  if (r) r->resize(m);
  if (J) J->setZero(m, 9);
  if (x.s.minCoeff() <= 1e-9 || !x.s.allFinite()) return std::numeric_limits<double>::infinity();

  const Mat3 Rt = x.R.transpose();
  const Vec3 inv_s = x.s.cwiseInverse();
  double cost = 0.0;
  for (int j = 0; j < n; ++j) {
    const Vec3& p = pp.problem().pairs[j].scan_point;
    const Vec3 q = (Rt * (p - x.t)).cwiseProduct(inv_s);
    const GridSample h = sample_trilinear(pp.heatmap(j, level), q);
    const double res = 1.0 - h.value;
    cost += res * res;
    if (r) (*r)[j] = res;
    if (J && h.gradient.squaredNorm() > 0.0) {
      const Mat3 DRt = inv_s.asDiagonal() * Rt;
      Eigen::Matrix<double, 3, 9> dq;
      dq.block<3, 3>(0, 0) = DRt * hat(p);
      dq.block<3, 3>(0, 3) = -DRt;
      dq.block<3, 3>(0, 6) = (-q.cwiseProduct(inv_s)).asDiagonal();
      J->row(j) = -h.gradient.transpose() * dq;
    }
  }
  if (lambda > 0.0) {
    const double sl = std::sqrt(lambda);
    for (int a = 0; a < 3; ++a) {
      if (r) (*r)[n + a] = sl * x.s[a];
      if (J) (*J)(n + a, 6 + a) = sl;
      cost += lambda * x.s[a] * x.s[a];
    }
  }
  return cost;
}

}  // namespace detail

/// Residual vector at pose psi(a, s) on the finest heatmaps: one data
/// residual per pair, then sqrt(lambda_s) * s when lambda_s > 0.
inline Eigen::VectorXd residuals(const PoseParams& pose, const PreparedProblem& pp) {
  Eigen::VectorXd r;
  detail::evaluate(pp, detail::PoseState::from_params(pose), pp.finest(), &r, nullptr);
  return r;
}

inline Eigen::VectorXd residuals(const PoseParams& pose, const AlignmentProblem& problem) {
  return residuals(pose, PreparedProblem(problem));
}

/// Jacobian of the residuals w.r.t. the increment (omega, v, ds) applied as
/// P' = exp(omega, v) * [R t] * diag(s + ds), evaluated at zero increment.
inline Eigen::MatrixXd jacobian(const PoseParams& pose, const PreparedProblem& pp) {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  detail::evaluate(pp, detail::PoseState::from_params(pose), pp.finest(), &r, &J);
  return J;
}

inline Eigen::MatrixXd jacobian(const PoseParams& pose, const AlignmentProblem& problem) {
  return jacobian(pose, PreparedProblem(problem));
}

/// Levenberg-Marquardt with Marquardt scaling, run coarse to fine over the
/// heatmap pyramid.
inline AlignmentCandidate lm_solve(const PreparedProblem& pp, const PoseParams& init,
                                   const SolverConfig& cfg, int restart_index = 0) {
  detail::PoseState x = detail::PoseState::from_params(init);
  AlignmentCandidate cand;
  cand.cad_id = pp.problem().cad_id;
  cand.restart_index = restart_index;

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  for (int level = 0; level < pp.num_levels(); ++level) {
    double mu = cfg.damping_init;
    double cost = detail::evaluate(pp, x, level, &r, &J);
    if (cfg.record_trace) cand.trace.push_back({0, level, cost, mu});
    for (int it = 1; it <= cfg.max_iterations; ++it) {
      const Eigen::Matrix<double, 9, 9> A = J.transpose() * J;
      const Vec9 g = J.transpose() * r;
      if (g.cwiseAbs().maxCoeff() < 1e-15) break;
      Eigen::Matrix<double, 9, 9> H = A;
      for (int d = 0; d < 9; ++d) H(d, d) += mu * std::max(A(d, d), 1e-9);
      const Vec9 step = H.ldlt().solve(-g);
      bool accepted = false;
      if (step.allFinite()) {
        const detail::PoseState cand_x = x.incremented(step);
        // The Jacobian is only needed once a step is accepted.
        const double new_cost = detail::evaluate(pp, cand_x, level, nullptr, nullptr);
        if (new_cost < cost) {
          const double decrease = cost - new_cost;
          x = cand_x;
          cost = detail::evaluate(pp, x, level, &r, &J);
          mu = std::max(mu * cfg.damping_down, 1e-12);
          ++cand.accepted_steps;
          accepted = true;
          if (cfg.record_trace) cand.trace.push_back({it, level, cost, mu});
          if (decrease < cfg.convergence_tol) break;
        }
      }
      if (!accepted) {
        mu *= cfg.damping_up;
        if (mu > cfg.damping_max) {
          cand.damping_ceiling = true;
          break;
        }
      }
    }
  }
  cand.cost = detail::evaluate(pp, x, pp.finest(), nullptr, nullptr);
  cand.pose = x.matrix();
  cand.params = x.params();
  return cand;
}

inline AlignmentCandidate lm_solve(const AlignmentProblem& problem, const PoseParams& init,
                                   const SolverConfig& cfg) {
  return lm_solve(PreparedProblem(problem), init, cfg);
}

/// Modes of a flat-kernel mean shift over the points, in first-seen order.
inline std::vector<Vec3> cluster_centers(const std::vector<Vec3>& points, double radius) {
  std::vector<Vec3> modes;
  const double r2 = radius * radius;
  for (const Vec3& start : points) {
    Vec3 m = start;
    for (int it = 0; it < 100; ++it) {
      Vec3 sum = Vec3::Zero();
      int n = 0;
      for (const Vec3& p : points)
        if ((p - m).squaredNorm() <= r2) {
          sum += p;
          ++n;
        }
      const Vec3 next = sum / std::max(n, 1);
      const bool done = (next - m).norm() < 1e-9;
      m = next;
      if (done) break;
    }
    bool known = false;
    for (const Vec3& q : modes) known = known || (q - m).norm() < 0.5 * radius;
    if (!known) modes.push_back(m);
  }
  return modes;
}

/// Initial poses: explicit poses if given, otherwise every restart
/// translation (default: keypoint cluster centers with a 3x3x3 jitter)
/// combined with the yaw fan.
inline std::vector<PoseParams> restart_poses(const AlignmentProblem& problem,
                                             const SolverConfig& cfg) {
  if (!cfg.initial_poses.empty()) return cfg.initial_poses;
  std::vector<Vec3> translations = cfg.restarts;
  if (translations.empty()) {
    std::vector<Vec3> pts;
    for (const auto& p : problem.pairs) pts.push_back(p.scan_point);
    for (const Vec3& c : cluster_centers(pts, cfg.cluster_radius))
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            translations.push_back(c + cfg.jitter_step * Vec3(dx, dy, dz));
  }
  // The fan covers one symmetry period; a rotationally symmetric model
  // needs only one yaw.
  const int order = problem.sym.order();
  const int fan = order == 0 ? 1 : std::max(cfg.yaw_fan, 1);
  const double period = 2.0 * kPi / std::max(order, 1);
  // Mean predicted scale over the pairs.
  Vec3 scale = Vec3::Zero();
  for (const auto& p : problem.pairs) scale += p.scale_pred;
  scale /= static_cast<double>(std::max<std::size_t>(problem.pairs.size(), 1));
  if (!(scale.minCoeff() > 0.0) || !scale.allFinite()) scale = Vec3::Ones();
  std::vector<PoseParams> out;
  for (const Vec3& t : translations)
    for (int k = 0; k < fan; ++k) {
      Mat4 g = Mat4::Identity();
      g.block<3, 3>(0, 0) = yaw_rotation(period * k / fan);
      g.block<3, 1>(0, 3) = t;
      out.push_back({log_se3(g), scale});
    }
  return out;
}

inline bool same_pose(const Transform& a, const Transform& b, double t_tol, double r_tol_deg,
                      double s_tol_pct) {
  const Trs da = decompose(a), db = decompose(b);
  return translation_error(da.translation, db.translation) < t_tol &&
         rotation_error(da.rotation, db.rotation, SymmetryTag{}) < r_tol_deg &&
         scale_error(da.scale, db.scale) < s_tol_pct;
}

/// One LM solve per initialization; near-identical results are merged and
/// the survivors sorted by cost (ties by restart index).
inline std::vector<AlignmentCandidate> align_multi(const AlignmentProblem& problem,
                                                   const SolverConfig& cfg) {
  const PreparedProblem pp(problem);
  const std::vector<PoseParams> inits = restart_poses(problem, cfg);
  std::vector<AlignmentCandidate> all;
  all.reserve(inits.size());
  for (std::size_t i = 0; i < inits.size(); ++i)
    all.push_back(lm_solve(pp, inits[i], cfg, static_cast<int>(i)));
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.restart_index < b.restart_index);
  });
  std::vector<AlignmentCandidate> kept;
  for (auto& c : all) {
    const bool valid = c.params.s.minCoeff() > 0.0 && std::isfinite(c.cost);
    if (!valid) continue;
    bool dup = false;
    for (const auto& k : kept)
      if (same_pose(c.pose, k.pose, cfg.dedup_translation, cfg.dedup_rotation_deg,
                    cfg.dedup_scale_pct)) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace cadalign
