#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace cadalign {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;
using Index3 = Eigen::Vector3i;

/// Homogeneous 4x4 transform acting on column vectors: y = m * [x; 1].
struct Transform {
  Mat4 m = Mat4::Identity();

  Transform() = default;
  explicit Transform(const Mat4& mat) : m(mat) {}

  static Transform identity() { return Transform(); }

  static Transform translation(const Vec3& t) {
    Transform out;
    out.m.block<3, 1>(0, 3) = t;
    return out;
  }

  static Transform linear(const Mat3& a, const Vec3& t = Vec3::Zero()) {
    Transform out;
    out.m.block<3, 3>(0, 0) = a;
    out.m.block<3, 1>(0, 3) = t;
    return out;
  }

  Mat3 linear_part() const { return m.block<3, 3>(0, 0); }
  Vec3 translation_part() const { return m.block<3, 1>(0, 3); }

  Vec3 apply(const Vec3& p) const {
    return m.block<3, 3>(0, 0) * p + m.block<3, 1>(0, 3);
  }
  Vec3 apply_vector(const Vec3& v) const { return m.block<3, 3>(0, 0) * v; }

  // Affine inverse; callers check invertibility with is_invertible().
  Transform inverse() const {
    const Mat3 inv = linear_part().inverse();
    return Transform::linear(inv, -inv * translation_part());
  }

  bool is_invertible(double eps = 1e-12) const {
    return std::abs(linear_part().determinant()) > eps &&
           linear_part().allFinite() && translation_part().allFinite();
  }

  Transform operator*(const Transform& o) const { return Transform(Mat4(m * o.m)); }
};

}  // namespace cadalign
