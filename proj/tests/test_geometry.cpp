#include <gtest/gtest.h>

#include "common.hpp"

using namespace cadalign;
using namespace testutil;

namespace {

Mat4 series_expm(const Mat4& A, int terms = 30) {
  Mat4 sum = Mat4::Identity(), term = Mat4::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * A / k;
    sum += term;
  }
  return sum;
}

Mat4 psi_oracle(const PoseParams& p) {
  Mat4 A = Mat4::Zero();
  const Vec3 w = p.rotation();
  A(0, 1) = -w.z(); A(0, 2) = w.y();
  A(1, 0) = w.z();  A(1, 2) = -w.x();
  A(2, 0) = -w.y(); A(2, 1) = w.x();
  A.block<3, 1>(0, 3) = p.translation();
  Mat4 S = Mat4::Identity();
  S.diagonal().head<3>() = p.s;
  return series_expm(A) * S;
}

PoseParams random_params(std::mt19937_64& rng) {
  PoseParams p;
  p.a.head<3>() = random_vec(rng, -2, 2);
  p.a.tail<3>() = random_vec(rng, -2, 2);
  p.s = random_vec(rng, 0.3, 2.0);
  return p;
}

Quat random_quat(std::mt19937_64& rng) { return canonical(Quat(random_rotation(rng))); }

double monte_carlo_iou(const OrientedBox& a, const OrientedBox& b, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Transform binv = b.transform.inverse();
  long inside = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 p = a.transform.apply(Vec3(u(rng), u(rng), u(rng)));
    inside += (binv.apply(p).cwiseAbs().array() <= 0.5).all();
  }
  const double inter = a.volume() * inside / samples;
  return inter / (a.volume() + b.volume() - inter);
}

OrientedBox random_box(std::mt19937_64& rng) {
  return OrientedBox::from_center_size(random_vec(rng, -0.3, 0.3), random_vec(rng, 0.5, 1.5),
                                       random_rotation(rng));
}

}  // namespace

TEST(Hat, Fixtures) {
  EXPECT_EQ(hat(Vec3::Zero()), Mat3::Zero());
  Mat3 expect;
  expect << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_EQ(hat(Vec3(1, 0, 0)), expect);
}

TEST(Hat, MatchesCrossProduct) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = random_vec(rng, -3, 3), v = random_vec(rng, -3, 3);
    EXPECT_LT((hat(w) * v - w.cross(v)).norm(), 1e-12);
    EXPECT_LT((hat(w) + hat(w).transpose()).norm(), 1e-15);
  }
}

TEST(PoseToMatrix, ZeroIsIdentity) {
  EXPECT_LT((pose_to_matrix(PoseParams{}).m - Mat4::Identity()).norm(), 1e-15);
}

TEST(PoseToMatrix, QuarterTurnAboutZ) {
  PoseParams p;
  p.a << 0, 0, kPi / 2, 0, 0, 0;
  const Transform t = pose_to_matrix(p);
  EXPECT_LT((t.apply(Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm(), 1e-9);
  EXPECT_LT((t.m - psi_oracle(p)).norm(), 1e-9);
}

TEST(PoseToMatrix, MatchesSeriesOracle) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 300; ++i) {
    const PoseParams p = random_params(rng);
    EXPECT_LT((pose_to_matrix(p).m - psi_oracle(p)).norm(), 1e-9);
  }
}

TEST(PoseToMatrix, SmallAnglesUseSeries) {
  std::mt19937_64 rng(3);
  for (double mag : {1e-5, 1e-7, 1e-9, 0.0}) {
    PoseParams p;
    p.a.head<3>() = mag * random_unit(rng);
    p.a.tail<3>() = random_vec(rng, -1, 1);
    EXPECT_LT((pose_to_matrix(p).m - psi_oracle(p)).norm(), 1e-12);
  }
}

TEST(PoseToMatrix, UnitScaleIsRigid) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    PoseParams p = random_params(rng);
    p.s = Vec3::Ones();
    const Mat3 R = pose_to_matrix(p).linear_part();
    ASSERT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-9);
    ASSERT_NEAR(R.determinant(), 1.0, 1e-9);
    ASSERT_LT((pose_to_matrix(p).m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm(), 1e-12);
  }
}

TEST(PoseToMatrix, CompositionIsRigidAndRoundTrips) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    PoseParams a = random_params(rng), b = random_params(rng);
    a.s = b.s = Vec3::Ones();
    const Transform c = pose_to_matrix(a) * pose_to_matrix(b);
    const Mat3 R = c.linear_part();
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-9);
    EXPECT_LT((decompose(c).matrix().m - c.m).norm(), 1e-9);
  }
}

TEST(Decompose, Fixtures) {
  const Trs id = decompose(Transform::identity());
  EXPECT_EQ(id.translation, Vec3::Zero());
  EXPECT_NEAR(id.rotation.w(), 1.0, 1e-15);
  EXPECT_LT(id.rotation.vec().norm(), 1e-15);
  EXPECT_LT((id.scale - Vec3::Ones()).norm(), 1e-15);
  const Trs tr = decompose(Transform::translation(Vec3(1, 2, 3)));
  EXPECT_EQ(tr.translation, Vec3(1, 2, 3));
  EXPECT_NEAR(tr.rotation.w(), 1.0, 1e-15);
  EXPECT_LT((tr.scale - Vec3::Ones()).norm(), 1e-15);
}

TEST(Decompose, RoundTripAndCanonicalQuaternion) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 500; ++i) {
    const Transform t = pose_to_matrix(random_params(rng));
    const Trs trs = decompose(t);
    EXPECT_LT((trs.matrix().m - t.m).norm(), 1e-9);
    EXPECT_GE(trs.rotation.w(), 0.0);
    EXPECT_NEAR(trs.rotation.norm(), 1.0, 1e-12);
  }
}

TEST(Decompose, Errors) {
  EXPECT_THROW(decompose(Transform::linear(Vec3(1, 1, -1).asDiagonal())), Error);
  EXPECT_THROW(decompose(Transform::linear(Vec3(1, 1, 1e-12).asDiagonal())), Error);
}

TEST(RotationError, Fixtures) {
  const SymmetryTag none, c2{SymmetryType::C2}, c4{SymmetryType::C4}, cinf{SymmetryType::Cinf};
  std::mt19937_64 rng(7);
  const Quat q = random_quat(rng);
  for (const auto& s : {none, c2, c4, cinf}) EXPECT_NEAR(rotation_error(q, q, s), 0.0, 1e-6);
  const Quat half = q * Quat(Eigen::AngleAxisd(kPi, Vec3::UnitY()));
  EXPECT_NEAR(rotation_error(half, q, c2), 0.0, 1e-6);
  const Quat quarter = q * Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitY()));
  EXPECT_NEAR(rotation_error(quarter, q, c2), 90.0, 1e-6);
  EXPECT_NEAR(rotation_error(quarter, q, c4), 0.0, 1e-6);
  EXPECT_NEAR(rotation_error(quarter, q, none), 90.0, 1e-6);
  const Quat tilt = q * Quat(Eigen::AngleAxisd(deg2rad(37.0), Vec3::UnitX()));
  EXPECT_NEAR(rotation_error(tilt, q, cinf), 37.0, 1e-6);
}

TEST(RotationError, CinfMatchesSampledYawOracle) {
  std::mt19937_64 rng(8);
  const SymmetryTag cinf{SymmetryType::Cinf};
  for (int i = 0; i < 5; ++i) {
    const Quat a = random_quat(rng), b = random_quat(rng);
    double best = 360;
    for (int k = 0; k < 36000; ++k)
      best = std::min(best, quaternion_angle_deg(a * Quat(Eigen::AngleAxisd(deg2rad(0.01 * k), Vec3::UnitY())), b));
    // the sampled minimum overshoots by at most half a step
    EXPECT_NEAR(rotation_error(a, b, cinf), best, 0.005);
    EXPECT_LE(rotation_error(a, b, cinf), best + 1e-9);
  }
}

TEST(RotationError, PseudometricOnQuotient) {
  std::mt19937_64 rng(9);
  for (SymmetryType t : {SymmetryType::None, SymmetryType::C2, SymmetryType::C4, SymmetryType::Cinf}) {
    const SymmetryTag s{t};
    for (int i = 0; i < 500; ++i) {
      const Quat a = random_quat(rng), b = random_quat(rng), c = random_quat(rng);
      EXPECT_NEAR(rotation_error(a, b, s), rotation_error(b, a, s), 1e-6);
      EXPECT_NEAR(rotation_error(a, a, s), 0.0, 1e-6);
      EXPECT_LE(rotation_error(a, c, s), rotation_error(a, b, s) + rotation_error(b, c, s) + 1e-6);
    }
  }
}

TEST(TranslationScaleError, Fixtures) {
  EXPECT_EQ(translation_error(Vec3(1, 2, 3), Vec3(1, 2, 3)), 0.0);
  EXPECT_NEAR(translation_error(Vec3(0.1, 0, 0), Vec3::Zero()), 0.1, 1e-15);
  EXPECT_EQ(scale_error(Vec3::Ones(), Vec3::Ones()), 0.0);
  EXPECT_NEAR(scale_error(Vec3(1.1, 0.95, 1.0), Vec3::Ones()), 10.0, 1e-12);
  EXPECT_THROW(scale_error(Vec3::Ones(), Vec3(1, 0, 1)), Error);
}

TEST(ObbIou, Fixtures) {
  const OrientedBox unit = OrientedBox::from_center_size(Vec3::Zero(), Vec3::Ones());
  EXPECT_NEAR(obb_iou(unit, unit), 1.0, 1e-12);
  EXPECT_EQ(obb_iou(unit, OrientedBox::from_center_size(Vec3(3, 0, 0), Vec3::Ones())), 0.0);
  const OrientedBox shifted = OrientedBox::from_center_size(Vec3(0.5, 0, 0), Vec3::Ones());
  EXPECT_NEAR(obb_iou(unit, shifted), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(monte_carlo_iou(unit, shifted, 1000000, 1), 1.0 / 3.0, 1e-2);
}

TEST(ObbIou, MatchesMonteCarlo) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 10; ++i) {
    const OrientedBox a = random_box(rng), b = random_box(rng);
    EXPECT_NEAR(obb_iou(a, b), monte_carlo_iou(a, b, 1000000, i), 1e-2);
  }
}

TEST(ObbIou, SymmetricAndMonotoneApart) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    OrientedBox a = random_box(rng), b = random_box(rng);
    EXPECT_NEAR(obb_iou(a, b), obb_iou(b, a), 1e-9);
    // concentric start, then b slides away along a fixed direction
    b.transform.m.block<3, 1>(0, 3) = a.transform.translation_part();
    const Vec3 d = random_unit(rng);
    double prev = obb_iou(a, b);
    for (int k = 1; k <= 20; ++k) {
      OrientedBox moved = b;
      moved.transform.m.block<3, 1>(0, 3) += 0.1 * k * d;
      const double iou = obb_iou(a, moved);
      EXPECT_LE(iou, prev + 1e-9);
      prev = iou;
    }
  }
}

TEST(ObbIou, DegenerateBoxFails) {
  const OrientedBox unit = OrientedBox::from_center_size(Vec3::Zero(), Vec3::Ones());
  const OrientedBox flat = OrientedBox::from_center_size(Vec3::Zero(), Vec3(1, 0, 1));
  EXPECT_THROW(obb_iou(unit, flat), Error);
}
