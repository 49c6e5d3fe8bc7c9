#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "idwarp/geometry.hpp"
#include "idwarp/kitti_io.hpp"
#include "idwarp/reproject.hpp"
#include "test_util.hpp"

namespace idwarp {
namespace {

using testing::Rng;

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

// exp(A) by its power series, summed until the terms vanish.
Eigen::Matrix3d expm_series(const Eigen::Matrix3d& a) {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity(), term = Eigen::Matrix3d::Identity();
  for (int n = 1; n < 40; ++n) {
    term = term * a / n;
    sum += term;
  }
  return sum;
}

TEST(EulerToRotation, Examples) {
  EXPECT_EQ(euler_to_rotation(Eigen::Vector3d::Zero()), Eigen::Matrix3d::Identity());
  const Eigen::Matrix3d half = euler_to_rotation({0.0, std::numbers::pi, 0.0});
  const Eigen::Matrix3d expected = Eigen::Vector3d(-1, 1, -1).asDiagonal();
  EXPECT_LE((half - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EulerToRotation, ComposesElementaryRotationsInOrder) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d w(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
    const Eigen::Matrix3d r = euler_to_rotation(w);
    const Eigen::Matrix3d expected = expm_series(skew({0, 0, w.z()})) * expm_series(skew({0, w.y(), 0})) *
                                     expm_series(skew({w.x(), 0, 0}));
    EXPECT_LE((r - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(EulerToRotation, SmallAnglesAreFirstOrderSkew) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double scale = std::pow(10.0, rng.uniform(-6, -1));
    const Eigen::Vector3d w = scale * Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Eigen::Matrix3d r = euler_to_rotation(w);
    const Eigen::Matrix3d first_order = Eigen::Matrix3d::Identity() + skew(w);
    EXPECT_LE((r - first_order).norm(), w.squaredNorm());
    EXPECT_LE((r - expm_series(skew(w))).norm(), w.squaredNorm());
  }
}

TEST(RigidTransform, CheckedRejectsNonRotation) {
  EXPECT_NO_THROW(RigidTransform::checked(euler_to_rotation({0.1, 0.2, 0.3}), {1, 2, 3}));
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1;
  EXPECT_THROW(RigidTransform::checked(reflect, Eigen::Vector3d::Zero()), Error);
  EXPECT_THROW(RigidTransform::checked(2.0 * Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()), Error);
}

TEST(MotionToTransform, FirstOrderMatchesInstantaneousModel) {
  const EgoMotion m{{1e-4, -2e-4, 3e-4}, {0.01, -0.02, 0.03}};
  const RigidTransform t = motion_to_transform(m);
  const Eigen::Vector3d p(1.5, -0.5, 8.0);
  const Eigen::Vector3d first_order = p - m.omega.cross(p) - m.t;
  EXPECT_LE((t.apply(p) - first_order).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ExactReproject, IdentityAndOnAxis) {
  const CameraIntrinsics k{300.0, 50.5, 20.5};
  const Reprojection r = exact_reproject(12.0, 7.0, 4.5, RigidTransform::identity(), k);
  EXPECT_NEAR(r.x, 12.0, 1e-12);
  EXPECT_NEAR(r.y, 7.0, 1e-12);
  EXPECT_EQ(r.depth, 4.5);
  EXPECT_FALSE(r.behind_camera);

  const double z = 12.0;
  const RigidTransform forward{Eigen::Matrix3d::Identity(), {0.0, 0.0, -z / 2}};
  const Reprojection c = exact_reproject(k.x0, k.y0, z, forward, k);
  EXPECT_EQ(c.x, k.x0);
  EXPECT_EQ(c.y, k.y0);
  EXPECT_EQ(c.depth, z / 2);
}

TEST(ExactReproject, BehindCameraIsFlagged) {
  const CameraIntrinsics k{300.0, 50.5, 20.5};
  const RigidTransform back{Eigen::Matrix3d::Identity(), {0.0, 0.0, -10.0}};
  const Reprojection r = exact_reproject(3.0, 3.0, 5.0, back, k);
  EXPECT_TRUE(r.behind_camera);
  EXPECT_THROW(exact_reproject(3.0, 3.0, 0.0, back, k), Error);
}

TEST(ExactReproject, InverseRoundTrip) {
  Rng rng(4);
  const CameraIntrinsics k{400.0, 303.5, 87.5};
  int tested = 0;
  for (int i = 0; i < 500; ++i) {
    const RigidTransform t = motion_to_transform(testing::random_motion(rng, 22.0, 2.0));
    const double x = rng.uniform(0, 607), y = rng.uniform(0, 175), z = rng.uniform(3, 80);
    const Reprojection a = exact_reproject(x, y, z, t, k);
    if (a.behind_camera) continue;
    const Reprojection b = exact_reproject(a.x, a.y, a.depth, t.inverse(), k);
    ASSERT_FALSE(b.behind_camera);
    EXPECT_NEAR(b.x, x, 1e-9);
    EXPECT_NEAR(b.y, y, 1e-9);
    EXPECT_NEAR(b.depth, z, 1e-9 * z);
    ++tested;
  }
  EXPECT_GT(tested, 300);
}

TEST(ExactFlowField, IdentityIsZero) {
  const CameraIntrinsics k{100.0, 15.5, 9.5};
  const FlowField f = exact_flow_field(DepthImage(20, 32, 7.0), RigidTransform::identity(), k);
  for (const auto& u : f.u) EXPECT_LE(u.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactFlowField, PureRotationIsDepthIndependent) {
  const CameraIntrinsics k{100.0, 15.5, 9.5};
  const RigidTransform rot{euler_to_rotation({0.02, -0.05, 0.01}), Eigen::Vector3d::Zero()};
  const FlowField a = exact_flow_field(DepthImage(20, 32, 3.0), rot, k);
  const FlowField b = exact_flow_field(DepthImage(20, 32, 55.0), rot, k);
  for (std::size_t i = 0; i < a.u.size(); ++i) EXPECT_LE((a.u[i] - b.u[i]).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExactFlowField, InvalidDepthGetsRotationOnly) {
  const CameraIntrinsics k{100.0, 15.5, 9.5};
  DepthImage d(8, 8, 5.0);
  d(3, 4) = 0.0;
  const RigidTransform t = motion_to_transform({{0.0, 0.01, 0.0}, {0.0, 0.0, 1.0}});
  const FlowField f = exact_flow_field(d, t, k);
  EXPECT_EQ(f.status[f.index(3, 4)], FlowStatus::rotation_only);
  const RigidTransform rot_only{t.rotation, Eigen::Vector3d::Zero()};
  const FlowField far = exact_flow_field(DepthImage(8, 8, 1e12), rot_only, k);
  EXPECT_LE((f.at(3, 4) - far.at(3, 4)).cwiseAbs().maxCoeff(), 1e-9);
}

// Max |instantaneous - exact| over the ramp scene for Omega_y = 2 deg * s,
// t_z = 0.5 m * s.
double small_motion_error(double s) {
  const CameraIntrinsics k{120.0, 95.5, 31.5};
  SyntheticScene scene;
  scene.kind = SceneKind::depth_ramp;
  const RenderedScene r = render_synthetic(scene, k, 64, 192);
  EgoMotion m;
  m.omega.y() = 2.0 * std::numbers::pi / 180.0 * s;
  m.t.z() = 0.5 * s;
  const FlowField a = flow_field(metric_inverse_depth(r.depth), m, k);
  const FlowField b = exact_flow_field(r.depth, motion_to_transform(m), k);
  double err = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) err = std::max(err, (a.u[i] - b.u[i]).cwiseAbs().maxCoeff());
  return err;
}

TEST(ExactFlowField, InstantaneousErrorIsQuadratic) {
  double prev = small_motion_error(1.0);
  for (int h = 1; h <= 4; ++h) {
    const double err = small_motion_error(std::pow(0.5, h));
    EXPECT_GE(prev / err, 3.5);
    EXPECT_LE(prev / err, 4.5);
    prev = err;
  }
}

TEST(ForwardWarp, IdentityReproducesInput) {
  Rng rng(6);
  const CameraIntrinsics k{80.0, 12.0, 8.0};
  const FeatureMap img = testing::random_tensor<float>(rng, 17, 25, 3);
  DepthImage d(17, 25);
  for (auto& v : d.meters) v = rng.uniform(2, 30);
  const auto r = forward_warp(img, d, RigidTransform::identity(), k);
  EXPECT_EQ(r.image, img);
  EXPECT_EQ(r.hole_count(), 0u);
  EXPECT_EQ(r.depth, d);
}

TEST(ForwardWarp, RetreatingCameraLeavesBorderHoles) {
  const CameraIntrinsics k{100.0, 31.5, 15.5};
  const RenderedScene s = render_synthetic(SyntheticScene{}, k, 32, 64);
  EgoMotion back;
  back.t.z() = -2.0;
  const auto r = forward_warp(s.image, s.depth, motion_to_transform(back), k);
  // The scene shrinks by 10/12 about the center; the outer rows and columns are empty.
  for (int x = 0; x < 64; ++x) {
    EXPECT_TRUE(r.hole_mask[r.depth.index(0, x)]);
    EXPECT_TRUE(r.hole_mask[r.depth.index(31, x)]);
  }
  for (int y = 0; y < 32; ++y) {
    EXPECT_TRUE(r.hole_mask[r.depth.index(y, 0)]);
    EXPECT_TRUE(r.hole_mask[r.depth.index(y, 63)]);
  }
  EXPECT_FALSE(r.hole_mask[r.depth.index(15, 31)]);
}

TEST(ForwardWarp, ConservesPixelCount) {
  Rng rng(7);
  const CameraIntrinsics k{60.0, 20.0, 12.0};
  for (int i = 0; i < 20; ++i) {
    DepthImage d(24, 40);
    for (auto& v : d.meters) v = rng.uniform(0, 1) < 0.1 ? 0.0 : rng.uniform(0.5, 20);
    const FeatureMap img = testing::random_tensor<float>(rng, 24, 40, 1);
    const auto r = forward_warp(img, d, motion_to_transform(testing::random_motion(rng, 20.0, 3.0)), k);
    EXPECT_EQ(r.splatted + r.behind_camera + r.out_of_bounds + r.invalid_depth, 24u * 40u);
    EXPECT_LE(24u * 40u - r.hole_count(), r.splatted);
  }
}

TEST(ForwardWarp, NearestDepthWins) {
  // f = 10, x0 = 2: a lateral shift tx moves pixel x at depth Z to
  // x + f * tx / Z. Two sources collide on one target in each case.
  const CameraIntrinsics k{10.0, 2.0, 0.0};
  FeatureMap img(1, 5, 1);
  img(0, 1) = 0.25f;
  img(0, 2) = 0.75f;

  // Nearer source visited first: 1 -> 1.8, 2 -> 2.4.
  DepthImage near_first(1, 5, 0.0);
  near_first(0, 1) = 5.0;
  near_first(0, 2) = 10.0;
  const auto a = forward_warp(img, near_first, RigidTransform{Eigen::Matrix3d::Identity(), {0.4, 0.0, 0.0}}, k);
  EXPECT_EQ(a.image(0, 2), 0.25f);
  EXPECT_EQ(a.depth(0, 2), 5.0);

  // Farther source visited first: 1 -> 0.7, 2 -> 1.4.
  DepthImage far_first(1, 5, 0.0);
  far_first(0, 1) = 10.0;
  far_first(0, 2) = 5.0;
  const auto b = forward_warp(img, far_first, RigidTransform{Eigen::Matrix3d::Identity(), {-0.3, 0.0, 0.0}}, k);
  EXPECT_EQ(b.image(0, 1), 0.75f);
  EXPECT_EQ(b.depth(0, 1), 5.0);
}

TEST(ForwardWarp, EqualDepthKeepsFirstSource) {
  // Both sources reach pixel 2 at the same depth; row-major order wins.
  const CameraIntrinsics k{10.0, 2.0, 0.0};
  FeatureMap img(1, 5, 1);
  img(0, 1) = 0.25f;
  img(0, 2) = 0.75f;
  DepthImage d(1, 5, 0.0);
  d(0, 1) = 10.0;
  d(0, 2) = 10.0;
  // Moving the scene to twice its depth halves offsets from x0 = 2:
  // 1 -> 1.5 -> 2 and 2 -> 2, both at depth 20.
  const auto r = forward_warp(img, d, RigidTransform{Eigen::Matrix3d::Identity(), {0.0, 0.0, 10.0}}, k);
  EXPECT_EQ(r.image(0, 2), 0.25f);
  EXPECT_EQ(r.depth(0, 2), 20.0);
  EXPECT_TRUE(r.hole_mask[1]);
}

TEST(ForwardWarp, RoundTripOnRampScene) {
  const CameraIntrinsics k{120.0, 95.5, 31.5};
  SyntheticScene scene;
  scene.kind = SceneKind::depth_ramp;
  const RenderedScene s = render_synthetic(scene, k, 64, 192);
  const RigidTransform t = motion_to_transform({{0.0, 0.5 * std::numbers::pi / 180.0, 0.0}, {0.0, 0.0, 0.2}});
  const auto there = forward_warp(s.image, s.depth, t, k);
  const auto back = forward_warp(there.image, there.depth, t.inverse(), k);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 192; ++x) {
      if (back.hole_mask[back.depth.index(y, x)]) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(back.image(y, x, c) - s.image(y, x, c));
      n += 3;
    }
  ASSERT_GT(n, 64u * 192u * 3u / 2u);
  EXPECT_LE(sum / n, 2.0 / 255.0);
}

TEST(ForwardWarp, ShapeMismatch) {
  EXPECT_THROW(forward_warp(FeatureMap(3, 4, 1), DepthImage(4, 3, 1.0), RigidTransform::identity(),
                            CameraIntrinsics{1, 0, 0}),
               Error);
}

TEST(RenderSynthetic, PlaneRampAndDeterminism) {
  const CameraIntrinsics k{100.0, 31.5, 15.5};
  SyntheticScene plane;
  plane.plane_depth = 10.0;
  const RenderedScene p = render_synthetic(plane, k, 16, 32);
  for (double z : p.depth.meters) EXPECT_EQ(z, 10.0);

  SyntheticScene ramp;
  ramp.kind = SceneKind::depth_ramp;
  const RenderedScene r = render_synthetic(ramp, k, 16, 32);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) EXPECT_NEAR(r.depth(y, x), 5.0 + 15.0 * y / 15.0, 1e-12);
  EXPECT_EQ(r.depth(0, 0), 5.0);
  EXPECT_EQ(r.depth(15, 0), 20.0);

  ramp.seed = 42;
  const RenderedScene a = render_synthetic(ramp, k, 16, 32), b = render_synthetic(ramp, k, 16, 32);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.depth, b.depth);
  ramp.seed = 43;
  EXPECT_NE(render_synthetic(ramp, k, 16, 32).image, a.image);
}

TEST(RenderSynthetic, TiltedPlaneDepth) {
  const CameraIntrinsics k{100.0, 31.5, 15.5};
  SyntheticScene tilted;
  tilted.kind = SceneKind::tilted_plane;
  tilted.plane_normal = Eigen::Vector3d(0.0, 0.3, 1.0).normalized();
  tilted.plane_distance = 8.0;
  const RenderedScene r = render_synthetic(tilted, k, 16, 32);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) EXPECT_NEAR(tilted.plane_normal.dot(back_project(x, y, r.depth(y, x), k)), 8.0, 1e-12);
}

TEST(RenderSynthetic, NonPositiveDepthIsDegenerate) {
  SyntheticScene bad;
  bad.plane_depth = -1.0;
  try {
    render_synthetic(bad, CameraIntrinsics{100, 1, 1}, 4, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

}  // namespace
}  // namespace idwarp
