#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "cadalign/error.hpp"
#include "cadalign/types.hpp"

namespace cadalign {

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Cross-product matrix: hat(w) * v == w.cross(v).
inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

/// 9DoF pose coordinates: a = (rotation, translation) in the se(3) algebra and
/// per-axis scale s.
struct PoseParams {
  Vec6 a = Vec6::Zero();
  Vec3 s = Vec3::Ones();

  Vec3 rotation() const { return a.head<3>(); }
  Vec3 translation() const { return a.tail<3>(); }
};

/// Closed-form SE(3) exponential (Rodrigues + V matrix), with Taylor
/// expansions below 1e-6 rad.
inline Mat4 exp_se3(const Vec6& a) {
  const Vec3 w = a.head<3>();
  const Vec3 v = a.tail<3>();
  const double th2 = w.squaredNorm();
  const double th = std::sqrt(th2);
  const Mat3 W = hat(w);
  const Mat3 W2 = W * W;
  double A, B, C;  // sin(t)/t, (1-cos t)/t^2, (t - sin t)/t^3
  if (th < 1e-6) {
    A = 1.0 - th2 / 6.0;
    B = 0.5 - th2 / 24.0;
    C = 1.0 / 6.0 - th2 / 120.0;
  } else {
    A = std::sin(th) / th;
    B = (1.0 - std::cos(th)) / th2;
    C = (th - std::sin(th)) / (th2 * th);
  }
  Mat4 T = Mat4::Identity();
  T.block<3, 3>(0, 0) = Mat3::Identity() + A * W + B * W2;
  T.block<3, 1>(0, 3) = (Mat3::Identity() + B * W + C * W2) * v;
  return T;
}

/// Rotation vector of a rotation matrix; robust near theta = pi.
inline Vec3 log_so3(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

inline Vec6 log_se3(const Mat4& T) {
  const Mat3 R = T.block<3, 3>(0, 0);
  const Vec3 w = log_so3(R);
  const double th2 = w.squaredNorm();
  const double th = std::sqrt(th2);
  const Mat3 W = hat(w);
  double B, C;
  if (th < 1e-6) {
    B = 0.5 - th2 / 24.0;
    C = 1.0 / 6.0 - th2 / 120.0;
  } else {
    B = (1.0 - std::cos(th)) / th2;
    C = (th - std::sin(th)) / (th2 * th);
  }
  const Mat3 V = Mat3::Identity() + B * W + C * W * W;
  Vec6 a;
  a.head<3>() = w;
  a.tail<3>() = V.inverse() * T.block<3, 1>(0, 3);
  return a;
}

/// psi(a, s) = expm([hat(a_rot) a_trans; 0 0]) * diag(s, 1).
inline Transform pose_to_matrix(const PoseParams& p) {
  Mat4 m = exp_se3(p.a);
  m.block<3, 3>(0, 0) = m.block<3, 3>(0, 0) * p.s.asDiagonal();
  return Transform(m);
}

/// Translation, rotation, scale factors with M = T * R * S.
struct Trs {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();  // normalized, w >= 0
  Vec3 scale = Vec3::Ones();

  Transform matrix() const {
    return Transform::linear(rotation.normalized().toRotationMatrix() * scale.asDiagonal(),
                             translation);
  }
};

inline Quat canonical(Quat q) {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

inline Trs decompose(const Transform& t) {
  const Mat3 M = t.linear_part();
  require(M.allFinite() && t.translation_part().allFinite(), "transform is not finite");
  require(M.determinant() > 0.0, "transform has non-positive determinant");
  Trs out;
  out.translation = t.translation_part();
  for (int c = 0; c < 3; ++c) out.scale[c] = M.col(c).norm();
  require(out.scale.minCoeff() > 1e-9, "transform has near-singular scale");
  Mat3 R = M * out.scale.cwiseInverse().asDiagonal();
  // Project onto SO(3); a no-op up to round-off for genuine T*R*S inputs.
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  R = svd.matrixU() * svd.matrixV().transpose();
  out.rotation = canonical(Quat(R));
  return out;
}

inline PoseParams params_from_matrix(const Transform& t) {
  const Trs trs = decompose(t);
  Mat4 rigid = Mat4::Identity();
  rigid.block<3, 3>(0, 0) = trs.rotation.toRotationMatrix();
  rigid.block<3, 1>(0, 3) = trs.translation;
  PoseParams p;
  p.a = log_se3(rigid);
  p.s = trs.scale;
  return p;
}

enum class SymmetryType { None, C2, C4, Cinf };

inline const char* to_string(SymmetryType s) {
  switch (s) {
    case SymmetryType::None: return "none";
    case SymmetryType::C2: return "C2";
    case SymmetryType::C4: return "C4";
    case SymmetryType::Cinf: return "Cinf";
  }
  return "none";
}

inline SymmetryType symmetry_from_string(const std::string& s) {
  if (s == "none" || s.empty()) return SymmetryType::None;
  if (s == "C2") return SymmetryType::C2;
  if (s == "C4") return SymmetryType::C4;
  if (s == "Cinf") return SymmetryType::Cinf;
  fail(ErrorKind::Validation, "unknown symmetry type '" + s + "'");
}

/// Rotational symmetry of a model about a model-space axis through the origin.
struct SymmetryTag {
  SymmetryType type = SymmetryType::None;
  Vec3 axis = Vec3::UnitY();

  /// Number of discrete group elements (Cinf reports 0).
  int order() const {
    switch (type) {
      case SymmetryType::None: return 1;
      case SymmetryType::C2: return 2;
      case SymmetryType::C4: return 4;
      case SymmetryType::Cinf: return 0;
    }
    return 1;
  }
};

inline double quaternion_angle_deg(const Quat& a, const Quat& b) {
  // atan2 keeps precision for nearly equal rotations, where acos does not
  const Quat r = a.normalized().conjugate() * b.normalized();
  return rad2deg(2.0 * std::atan2(r.vec().norm(), std::abs(r.w())));
}

/// Geodesic rotation error in degrees modulo the model's symmetry group.
/// For Cinf only the image of the symmetry axis matters.
inline double rotation_error(const Quat& q_pred, const Quat& q_gt, const SymmetryTag& sym) {
  const Vec3 axis = sym.axis.normalized();
  if (sym.type == SymmetryType::Cinf) {
    const Vec3 a = q_pred.normalized() * axis;
    const Vec3 b = q_gt.normalized() * axis;
    return rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
  }
  const int n = sym.order();
  double best = 360.0;
  for (int k = 0; k < n; ++k) {
    const Quat g(Eigen::AngleAxisd(2.0 * kPi * k / n, axis));
    best = std::min(best, quaternion_angle_deg(q_pred * g, q_gt));
  }
  return best;
}

inline double translation_error(const Vec3& t_pred, const Vec3& t_gt) {
  return (t_pred - t_gt).norm();
}

/// Largest per-axis relative scale deviation, in percent.
inline double scale_error(const Vec3& s_pred, const Vec3& s_gt) {
  require(s_gt.minCoeff() > 0.0, "ground-truth scale must be positive");
  return 100.0 * ((s_pred - s_gt).cwiseAbs().cwiseQuotient(s_gt)).maxCoeff();
}

inline Mat3 yaw_rotation(double radians) {
  return Eigen::AngleAxisd(radians, Vec3::UnitY()).toRotationMatrix();
}

}  // namespace cadalign
