#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cadalign/error.hpp"
#include "cadalign/geometry.hpp"
#include "cadalign/keypoints.hpp"

namespace cadalign {

struct CmaesOptions {
  int population = 0;  // 0: 4 + floor(3 ln n)
  int max_generations = 500;
  double sigma0 = 0.5;
  double ftarget = -std::numeric_limits<double>::infinity();
  double tolx = 1e-13;
  std::uint64_t seed = 0;
};

struct CmaesResult {
  Eigen::VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  int generations = 0;
  int evaluations = 0;
};

/// (mu/mu_w, lambda)-CMA-ES with the standard default strategy parameters.
/// Returns the best point ever evaluated.
template <class F>
CmaesResult cmaes_minimize(F&& f, const Eigen::VectorXd& x0, const CmaesOptions& opt) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = static_cast<int>(x0.size());
  require(n >= 1, "CMA-ES needs at least one dimension");
  require(opt.sigma0 > 0.0, "CMA-ES sigma0 must be positive");
  const int lambda = opt.population > 0 ? opt.population
                                        : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  require(lambda >= 2, "CMA-ES population must be at least 2");
  const int mu = lambda / 2;

  VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();

  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu =
      std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double chin = std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  VectorXd mean = x0;
  double sigma = opt.sigma0;
  VectorXd pc = VectorXd::Zero(n), ps = VectorXd::Zero(n);
  MatrixXd C = MatrixXd::Identity(n, n), B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  MatrixXd invsqrtC = MatrixXd::Identity(n, n);
  int eigen_eval = 0;

  CmaesResult res;
  res.best_x = x0;
  std::vector<VectorXd> xs(lambda);
  std::vector<double> fs(lambda);
  std::vector<int> order(lambda);

  for (int gen = 1; gen <= opt.max_generations; ++gen) {
    for (int k = 0; k < lambda; ++k) {
      VectorXd z(n);
      for (int i = 0; i < n; ++i) z[i] = gauss(rng);
      xs[k] = mean + sigma * (B * D.cwiseProduct(z));
      fs[k] = f(xs[k]);
      ++res.evaluations;
      if (fs[k] < res.best_f) {
        res.best_f = fs[k];
        res.best_x = xs[k];
      }
    }
    res.generations = gen;
    if (res.best_f <= opt.ftarget) break;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });

    const VectorXd old = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += w[i] * xs[order[i]];

    const VectorXd step = (mean - old) / sigma;
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (invsqrtC * step);
    const double psn = ps.norm();
    const bool hsig = psn / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen)) / chin <
                      1.4 + 2.0 / (n + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * step;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const VectorXd y = (xs[order[i]] - old) / sigma;
      rank_mu += w[i] * y * y.transpose();
    }
    C = (1.0 - c1 - cmu) * C +
        c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * C) + cmu * rank_mu;
    sigma *= std::exp((cs / damps) * (psn / chin - 1.0));

    if (res.evaluations - eigen_eval > lambda / (c1 + cmu) / n / 10.0) {
      eigen_eval = res.evaluations;
      C = 0.5 * (C + C.transpose());
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
      if (es.info() != Eigen::Success) break;
      B = es.eigenvectors();
      D = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
      invsqrtC = B * D.cwiseInverse().asDiagonal() * B.transpose();
    }
    if (!std::isfinite(sigma) || sigma * D.maxCoeff() < opt.tolx) break;
  }
  return res;
}

struct PairAlignmentConfig {
  int max_generations = 500;
  int population = 10;
  double sigma0 = 0.5;
  std::uint64_t seed = 0;
};

struct PairAlignment {
  PoseParams params;
  double rms = 0.0;  // meters
  int generations = 0;
};

namespace detail {

inline Transform pair_pose(const Eigen::VectorXd& x) {
  PoseParams p;
  p.a = x.head<6>();
  p.s = x.tail<3>();
  return pose_to_matrix(p);
}

}  // namespace detail

/// 9DoF pose from point pairs: minimizes sum |T(a,s) cad_i - scan_i|^2 with
/// CMA-ES. Both point sets are centered internally; pairs of negative scale
/// factors are folded into the rotation on return.
inline PairAlignment cmaes_solve_pairs(const std::vector<SurfacePair>& pairs,
                                       const PairAlignmentConfig& cfg = {}) {
  if (pairs.size() < 6) fail(ErrorKind::Validation, "pair alignment needs at least 6 pairs");
  const int n = static_cast<int>(pairs.size());
  Vec3 cbar = Vec3::Zero(), pbar = Vec3::Zero();
  for (const auto& pr : pairs) {
    cbar += pr.cad_point;
    pbar += pr.scan_point;
  }
  cbar /= n;
  pbar /= n;
  std::vector<Vec3> cad(n), scan(n);
  for (int i = 0; i < n; ++i) {
    cad[i] = pairs[i].cad_point - cbar;
    scan[i] = pairs[i].scan_point - pbar;
  }

  auto cost = [&](const Eigen::VectorXd& x) {
    const Transform t = detail::pair_pose(x);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += (t.apply(cad[i]) - scan[i]).squaredNorm();
    return sum;
  };

  Eigen::VectorXd x0(9);
  x0 << 0, 0, 0, 0, 0, 0, 1, 1, 1;
  CmaesOptions opt;
  opt.population = cfg.population;
  opt.max_generations = cfg.max_generations;
  opt.sigma0 = cfg.sigma0;
  opt.seed = cfg.seed;
  const CmaesResult r = cmaes_minimize(cost, x0, opt);

  const Transform tc = detail::pair_pose(r.best_x);
  Mat3 R = exp_se3(r.best_x.head<6>()).block<3, 3>(0, 0);
  Vec3 s = r.best_x.tail<3>();
  const Vec3 t = tc.translation_part() + pbar - tc.linear_part() * cbar;
  int negatives = 0;
  for (int a = 0; a < 3; ++a) negatives += s[a] < 0.0;
  if (negatives == 2) {
    Vec3 flip = Vec3::Ones();
    for (int a = 0; a < 3; ++a)
      if (s[a] < 0.0) flip[a] = -1.0;
    R = R * flip.asDiagonal();
    s = s.cwiseProduct(flip);
  }
  Mat4 g = Mat4::Identity();
  g.block<3, 3>(0, 0) = R;
  g.block<3, 1>(0, 3) = t;

  PairAlignment out;
  out.params.a = log_se3(g);
  out.params.s = s;
  out.rms = std::sqrt(r.best_f / n);
  out.generations = r.generations;
  return out;
}

}  // namespace cadalign
