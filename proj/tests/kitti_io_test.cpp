#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "idwarp/image_io.hpp"
#include "idwarp/kitti_io.hpp"
#include "test_util.hpp"

namespace idwarp {
namespace {

using testing::Rng;
using testing::TempDir;

RigidTransform random_pose(Rng& rng) {
  const Eigen::Vector3d w(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
  return {euler_to_rotation(w), {rng.uniform(-100, 100), rng.uniform(-10, 10), rng.uniform(-100, 100)}};
}

TEST(DepthPng, StoredValuesToMeters) {
  TempDir dir("depth");
  Tensor<std::uint16_t> raw(2, 3, 1);
  raw.data = {256, 0, 512, 1, 65535, 384};
  write_gray16(dir.file("d.png"), raw);
  const DepthImage d = load_depth_png(dir.file("d.png"));
  EXPECT_EQ(d(0, 0), 1.0);
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_FALSE(d.valid(0, 1));
  EXPECT_EQ(d(0, 2), 2.0);
  EXPECT_EQ(d(1, 0), 1.0 / 256.0);
  EXPECT_EQ(d(1, 1), 65535.0 / 256.0);
  EXPECT_EQ(d(1, 2), 1.5);
}

TEST(DepthPng, RoundTripIsBitwise) {
  TempDir dir("depth_rt");
  Rng rng(1);
  Tensor<std::uint16_t> raw(37, 53, 1);
  for (auto& v : raw.data) v = static_cast<std::uint16_t>(rng.uniform(0, 1) < 0.9 ? 0 : rng.integer(0, 65535));
  write_gray16(dir.file("a.png"), raw);
  EXPECT_EQ(read_gray16(dir.file("a.png")), raw);

  const DepthImage d = load_depth_png(dir.file("a.png"));
  save_depth_png(dir.file("b.png"), d);
  EXPECT_EQ(testing::read_bytes(dir.file("a.png")), testing::read_bytes(dir.file("b.png")));
  EXPECT_EQ(load_depth_png(dir.file("b.png")), d);
}

TEST(DepthPng, WrongFormatIsIoError) {
  TempDir dir("depth_bad");
  write_image(dir.file("rgb.png"), FeatureMap(4, 4, 3, 0.5f));
  try {
    load_depth_png(dir.file("rgb.png"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find("16-bit"), std::string::npos);
  }
  write_image(dir.file("gray8.png"), FeatureMap(4, 4, 1, 0.5f));
  EXPECT_THROW(load_depth_png(dir.file("gray8.png")), Error);
  EXPECT_THROW(load_depth_png(dir.file("missing.png")), Error);
  testing::write_text(dir.file("junk.png"), "not a png");
  EXPECT_THROW(load_depth_png(dir.file("junk.png")), Error);
}

TEST(NormalizeInverseDepth, Examples) {
  EXPECT_EQ(*normalize_inverse_depth(3.5), 0.0);
  EXPECT_EQ(*normalize_inverse_depth(2.5), 1.0);
  EXPECT_NEAR(*normalize_inverse_depth(201.5), -0.99, 1e-15);
  EXPECT_EQ(*normalize_inverse_depth(2.0), 1.0);
  EXPECT_FALSE(normalize_inverse_depth(1.5));
  EXPECT_FALSE(normalize_inverse_depth(1.0));
  EXPECT_FALSE(normalize_inverse_depth(0.0));
  EXPECT_FALSE(normalize_inverse_depth(-3.0));
  EXPECT_FALSE(normalize_inverse_depth(std::nan("")));
  EXPECT_FALSE(normalize_inverse_depth(INFINITY));
}

TEST(NormalizeInverseDepth, StrictlyDecreasingAndBounded) {
  double prev = 2.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = 2.5 + i * 0.1;
    const double v = *normalize_inverse_depth(x);
    EXPECT_LT(v, prev);
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
    prev = v;
  }
}

TEST(NormalizedInverseDepth, FlagsInvalid) {
  DepthImage d(1, 4);
  d.meters = {0.0, 1.2, 3.5, 10.0};
  const InverseDepthMap n = normalized_inverse_depth(d);
  EXPECT_EQ(n.mask, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(n.values[2], 0.0);
  const InverseDepthMap m = metric_inverse_depth(d);
  EXPECT_EQ(m.mask, (std::vector<std::uint8_t>{0, 1, 1, 1}));
  EXPECT_EQ(m.values[3], 0.1);
}

TEST(OdometryPoses, Parsing) {
  std::istringstream one("1 0 0 0 0 1 0 0 0 0 1 0\n");
  const auto p = parse_odometry_poses(one);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].matrix, (Eigen::Matrix<double, 3, 4>::Identity()));

  std::istringstream empty("");
  EXPECT_TRUE(parse_odometry_poses(empty).empty());

  Rng rng(2);
  std::ostringstream os;
  std::vector<PoseRecord> written;
  for (int i = 0; i < 25; ++i) {
    written.push_back(PoseRecord::from_transform(random_pose(rng)));
    os << format_pose_line(written.back()) << "\n";
  }
  std::istringstream many(os.str());
  const auto read = parse_odometry_poses(many);
  ASSERT_EQ(read.size(), 25u);
  for (int i = 0; i < 25; ++i) EXPECT_EQ(read[i].matrix, written[i].matrix);
}

TEST(OdometryPoses, ErrorsNameTheLine) {
  std::istringstream short_line("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1\n");
  try {
    parse_odometry_poses(short_line, "poses.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find("poses.txt:2"), std::string::npos);
  }
  std::istringstream junk("1 0 0 0 0 1 0 x 0 0 1 0\n");
  EXPECT_THROW(parse_odometry_poses(junk), Error);
  std::istringstream skewed("2 0 0 0 0 1 0 0 0 0 1 0\n");
  EXPECT_THROW(parse_odometry_poses(skewed), Error);
  EXPECT_THROW(load_odometry_poses("/nonexistent/poses.txt"), Error);
}

TEST(RelativeMotion, Examples) {
  Rng rng(3);
  const PoseRecord p = PoseRecord::from_transform(random_pose(rng));
  const RelativeMotion same = relative_motion(p, p);
  EXPECT_LE(same.motion.omega.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(same.motion.t.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_FALSE(same.degenerate);

  // pose_j = pose_i * translate(0, 0, 5): camera j sits 5 m ahead along i's axis.
  const RigidTransform step{Eigen::Matrix3d::Identity(), {0.0, 0.0, 5.0}};
  const RelativeMotion fwd = relative_motion(p, PoseRecord::from_transform(p.transform() * step));
  EXPECT_LE(fwd.motion.omega.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((fwd.motion.t - Eigen::Vector3d(0, 0, 5)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RelativeMotion, RoundTrips) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const PoseRecord a = PoseRecord::from_transform(random_pose(rng));
    const PoseRecord b = PoseRecord::from_transform(random_pose(rng));
    const RelativeMotion ab = relative_motion(a, b), ba = relative_motion(b, a);
    ASSERT_FALSE(ab.degenerate);
    const Eigen::Matrix3d rel = (a.transform().inverse() * b.transform()).rotation;
    EXPECT_LE((euler_to_rotation(ab.motion.omega) - rel).cwiseAbs().maxCoeff(), 1e-9);
    const RigidTransform loop = motion_pose(ab.motion) * motion_pose(ba.motion);
    EXPECT_LE((loop.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(loop.translation.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RelativeMotion, KnownMotionRecovered) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const EgoMotion m = testing::random_motion(rng);
    const PoseRecord a = PoseRecord::from_transform(random_pose(rng));
    const PoseRecord b = PoseRecord::from_transform(a.transform() * motion_pose(m));
    const RelativeMotion r = relative_motion(a, b);
    EXPECT_LE((r.motion.omega - m.omega).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((r.motion.t - m.t).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RelativeMotion, GimbalIsFlagged) {
  const PoseRecord a;
  const PoseRecord b = PoseRecord::from_transform({euler_to_rotation({0.3, std::numbers::pi / 2, -0.2}), {1, 2, 3}});
  const RelativeMotion r = relative_motion(a, b);
  EXPECT_TRUE(r.degenerate);
  // The recovered angles still rebuild the rotation.
  EXPECT_LE((euler_to_rotation(r.motion.omega) - b.rotation()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Resize, SameSizeIsIdentity) {
  Rng rng(6);
  const Tensor<double> img = testing::random_tensor<double>(rng, 9, 14, 3);
  const Tensor<double> out = resize_bilinear(img, 9, 14);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data[i], img.data[i], 1e-12);
}

TEST(Resize, ConstantStaysConstant) {
  const FeatureMap img(352, 1216, 3, 0.375f);
  const FeatureMap out = resize_half_to(img);
  EXPECT_EQ(out.height, 176);
  EXPECT_EQ(out.width, 608);
  for (float v : out.data) EXPECT_EQ(v, 0.375f);
}

TEST(Resize, HalvingAveragesPixelPairs) {
  Rng rng(7);
  const Tensor<double> img = testing::random_tensor<double>(rng, 8, 12, 1);
  const Tensor<double> out = resize_bilinear(img, 4, 6);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      const double expected = 0.25 * (img(2 * y, 2 * x) + img(2 * y, 2 * x + 1) + img(2 * y + 1, 2 * x) +
                                       img(2 * y + 1, 2 * x + 1));
      EXPECT_NEAR(out(y, x), expected, 1e-12);
    }
}

TEST(Resize, Errors) {
  EXPECT_THROW(resize_bilinear(FeatureMap(4, 4, 1), 0, 3), Error);
  EXPECT_THROW(resize_bilinear(FeatureMap(1, 4, 1), 2, 2), Error);
}

TEST(ScaleIntrinsics, HalvesFocal) {
  const ScaledIntrinsics s = scale_intrinsics({721.5377, 609.5593, 172.854}, 352, 1216, 176, 608);
  EXPECT_EQ(s.intrinsics.f, 721.5377 / 2);
  EXPECT_EQ(s.intrinsics.x0, 609.5593 / 2);
  EXPECT_EQ(s.intrinsics.y0, 172.854 / 2);
  EXPECT_TRUE(s.aspect_preserved);
  EXPECT_FALSE(scale_intrinsics({700, 600, 180}, 375, 1242, 176, 608).aspect_preserved);
}

// O(n^2) nearest valid pixel, ties to the smallest row then column.
DepthImage brute_force_densify(const DepthImage& d) {
  DepthImage out = d;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      if (d.valid(y, x)) continue;
      long best = -1;
      double value = 0.0;
      for (int yy = 0; yy < d.height; ++yy)
        for (int xx = 0; xx < d.width; ++xx) {
          if (!d.valid(yy, xx)) continue;
          const long d2 = long(yy - y) * (yy - y) + long(xx - x) * (xx - x);
          if (best < 0 || d2 < best) {
            best = d2;
            value = d(yy, xx);
          }
        }
      out(y, x) = value;
    }
  return out;
}

TEST(Densify, Examples) {
  Rng rng(8);
  DepthImage dense(6, 9);
  for (auto& v : dense.meters) v = rng.uniform(1, 50);
  EXPECT_EQ(densify_depth(dense), dense);

  DepthImage single(7, 11);
  single(3, 8) = 12.5;
  for (double v : densify_depth(single).meters) EXPECT_EQ(v, 12.5);

  try {
    densify_depth(DepthImage(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(Densify, MatchesBruteForceAndIsIdempotent) {
  Rng rng(9);
  for (int i = 0; i < 30; ++i) {
    const int h = rng.integer(1, 30), w = rng.integer(1, 40);
    const double density = i < 10 ? 0.05 : rng.uniform(0.01, 0.6);
    DepthImage d(h, w);
    for (auto& v : d.meters) v = rng.uniform(0, 1) < density ? static_cast<double>(rng.integer(1, 20)) : 0.0;
    d.meters[rng.integer(0, h * w - 1)] = 7.0;
    const DepthImage out = densify_depth(d);
    EXPECT_EQ(out, brute_force_densify(d));
    EXPECT_EQ(densify_depth(out), out);
    for (std::size_t k = 0; k < d.meters.size(); ++k)
      if (d.meters[k] > 0.0) {
        EXPECT_EQ(out.meters[k], d.meters[k]);
      }
  }
}

}  // namespace
}  // namespace idwarp
